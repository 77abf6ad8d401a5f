"""Learnable re-estimation of the incidence structure (the HERALD adaptor).

From node features and the fixed topology, produce a soft incidence matrix
H_soft via hyperedge feature averaging, self-attention over nodes, a
parameterized squared-difference distance and a Gaussian kernel; renormalize
it into a propagation matrix N_res and blend residually with the original
propagation matrix N. Every step runs on the autodiff tape, so the three
parameter matrices train end-to-end.

Distances are clamped at zero from below before the kernel (with zero
gradient in the clamped region): the projection vector is unconstrained, so
raw distances can go negative and the kernel would otherwise exceed 1. The
clamp keeps every soft-incidence entry an honest connection probability in
(0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ShapeError
from .hypergraph import Hypergraph

DEFAULT_SIGMA = 20.0


@dataclass
class HeraldParams:
    """Trainable adaptor parameters for one instrumented layer.

    w_edge and w_node are d x h transforms (hyperedge features and the
    attention map share the output width h); w_dist projects squared
    differences down to a scalar distance. sigma is the fixed Gaussian
    bandwidth, not trained.
    """

    w_node: Tensor
    w_edge: Tensor
    w_dist: Tensor
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        if self.w_node.shape != self.w_edge.shape:
            raise ConfigError(
                "w_node and w_edge must share dimensions, got "
                f"{self.w_node.shape} vs {self.w_edge.shape}")
        h = self.w_node.shape[1]
        if self.w_dist.shape != (h, 1):
            raise ConfigError(
                f"w_dist must have shape ({h}, 1), got {self.w_dist.shape}")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")

    @classmethod
    def init(cls, rng: np.random.Generator, in_dim: int, width: int,
             sigma: float = DEFAULT_SIGMA) -> "HeraldParams":
        def glorot(fan_in, fan_out, shape):
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            return Tensor(rng.uniform(-bound, bound, size=shape))

        return cls(
            w_node=glorot(in_dim, width, (in_dim, width)),
            w_edge=glorot(in_dim, width, (in_dim, width)),
            w_dist=glorot(width, 1, (width, 1)),
            sigma=sigma,
        )

    def tensors(self) -> list[tuple[str, Tensor]]:
        return [("w_node", self.w_node), ("w_edge", self.w_edge),
                ("w_dist", self.w_dist)]

    def count(self) -> int:
        return sum(t.data.size for _, t in self.tensors())


@dataclass
class HeraldOutput:
    """Soft incidence and the derived operators for one adaptor pass."""

    h_soft: Tensor       # |V| x |E|, entries in (0, 1]
    n_res: Tensor        # |V| x |V|, learned propagation matrix
    n_hat: Tensor        # |V| x |V|, residual blend
    l_tilde: Tensor      # |V| x |V|, I - n_hat
    attention: Tensor    # |V| x |V| attention weights (diagnostics / tests)


def averaging_matrix(hg: Hypergraph) -> np.ndarray:
    """Constant |E| x |V| matrix M with M[e, v] = 1/|e| for v in e, so that
    M @ X averages node features over each hyperedge's original binary
    membership."""
    M = np.zeros((hg.num_edges, hg.num_nodes), dtype=np.float64)
    for j, e in enumerate(hg.hyperedges):
        M[j, list(e)] = 1.0 / len(e)
    return M


def hyperedge_features(X: Tensor, hg: Hypergraph) -> Tensor:
    """Average the features of incident hypernodes, edge by edge."""
    if X.ndim != 2 or X.shape[0] != hg.num_nodes:
        raise ShapeError(
            f"features {X.shape} do not match hypergraph with {hg.num_nodes} nodes")
    return ad.matmul(ad.constant(averaging_matrix(hg)), X)


def transform_hyperedges(X_edges: Tensor, w_edge: Tensor) -> Tensor:
    """Linear transform of hyperedge features: row e becomes w_edge^T x_e."""
    return ad.matmul(X_edges, w_edge)


def attend_nodes(X: Tensor, w_node: Tensor) -> tuple[Tensor, Tensor]:
    """Self-attention over all nodes.

    z_i = w_node^T x_i, logits gamma_ij = <z_i, z_j>, weights alpha row-wise
    softmax over every node, output row i is sum_j alpha_ij z_j. Returns
    (attended features |V| x h, attention weights |V| x |V|).
    """
    z = ad.matmul(X, w_node)
    logits = ad.matmul(z, ad.transpose(z))
    alpha = ad.softmax_rows(logits)
    return ad.matmul(alpha, z), alpha


def distance_matrix(X_attn: Tensor, X_edges: Tensor, w_dist: Tensor) -> Tensor:
    """d_ij = w_dist^T (x_i - x_e_j)^{circ 2}: elementwise squared difference,
    projected to a scalar per node/hyperedge pair.

    Expanded to x_i^2 w - 2 x_i diag(w) x_e^T + x_e^2 w so only |V| x h,
    |E| x h and |V| x |E| intermediates are materialized.
    """
    if X_attn.shape[1] != X_edges.shape[1]:
        raise ShapeError(
            f"feature widths disagree: nodes {X_attn.shape}, edges {X_edges.shape}")
    if w_dist.shape != (X_attn.shape[1], 1):
        raise ShapeError(
            f"w_dist must be ({X_attn.shape[1]}, 1), got {w_dist.shape}")
    n_nodes, n_edges = X_attn.shape[0], X_edges.shape[0]
    u = ad.matmul(ad.square(X_attn), w_dist)                        # |V| x 1
    w = ad.matmul(ad.square(X_edges), w_dist)                       # |E| x 1
    cross = ad.matmul(ad.scale_cols(X_attn, w_dist),
                      ad.transpose(X_edges))                        # |V| x |E|
    node_part = ad.matmul(u, ad.constant(np.ones((1, n_edges))))
    edge_part = ad.matmul(ad.constant(np.ones((n_nodes, 1))), ad.transpose(w))
    return ad.add(ad.sub(node_part, ad.scale(cross, 2.0)), edge_part)


def soft_incidence(D: Tensor, sigma: float) -> Tensor:
    """Gaussian kernel exp(-d / (2 sigma^2)) on non-negatively clamped
    distances; every entry lands in (0, 1]."""
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    return ad.exp(ad.scale(ad.relu(D), -1.0 / (2.0 * sigma * sigma)))


def residual_propagation(h_soft: Tensor) -> Tensor:
    """Renormalize a soft incidence into a propagation matrix with unit soft
    hyperedge weights: Dv~^{-1/2} H~ De~^{-1} H~^T Dv~^{-1/2}. Soft degrees
    are strictly positive because the kernel is."""
    d_v = ad.sum_rows(h_soft)
    d_e = ad.sum_rows(ad.transpose(h_soft))
    A = ad.scale_rows(h_soft, ad.pow_const(d_v, -0.5))
    B = ad.scale_cols(A, ad.pow_const(d_e, -1.0))
    return ad.matmul(B, ad.transpose(A))


def herald_forward(X: Tensor, hg: Hypergraph, N: np.ndarray,
                   params: HeraldParams, a: float) -> HeraldOutput:
    """Full adaptor pass: soft incidence, learned propagation matrix, and the
    residual blend n_hat = (1 - a) N + a n_res, plus l_tilde = I - n_hat.

    ``N`` is the fixed propagation matrix of ``hg`` (a constant here);
    gradients flow to the three parameter matrices through the soft path.
    """
    if not 0.0 <= a <= 1.0:
        raise ConfigError(f"blend strength a must lie in [0, 1], got {a}")
    if N.shape != (hg.num_nodes, hg.num_nodes):
        raise ShapeError(
            f"propagation matrix {N.shape} does not match |V|={hg.num_nodes}")
    edge_feats = transform_hyperedges(hyperedge_features(X, hg), params.w_edge)
    node_feats, alpha = attend_nodes(X, params.w_node)
    D = distance_matrix(node_feats, edge_feats, params.w_dist)
    h_soft = soft_incidence(D, params.sigma)
    n_res = residual_propagation(h_soft)
    n_hat = ad.add(ad.scale(ad.constant(N), 1.0 - a), ad.scale(n_res, a))
    l_tilde = ad.sub(ad.constant(np.eye(hg.num_nodes)), n_hat)
    return HeraldOutput(h_soft=h_soft, n_res=n_res, n_hat=n_hat,
                        l_tilde=l_tilde, attention=alpha)


def a_schedule(layer_index: int) -> float:
    """Blend strength for layer l (1-based): 1 - 0.9 (cos(pi (l-1)/10) + 1)/2.

    Rises smoothly from 0.1 at the first layer, so deeper layers lean harder
    on the learned topology.
    """
    if layer_index < 1 or int(layer_index) != layer_index:
        raise ConfigError(f"layer index must be a positive integer, got {layer_index}")
    return 1.0 - 0.9 * (math.cos(math.pi * (layer_index - 1) / 10.0) + 1.0) / 2.0


def topology_regularizer(N: np.ndarray, n_res: Tensor) -> Tensor:
    """Frobenius norm of N - n_res; keeps the learned topology anchored to
    the original one. The caller applies the loss weight."""
    if n_res.shape != N.shape:
        raise ShapeError(
            f"regularizer shapes disagree: N {N.shape}, n_res {n_res.shape}")
    return ad.frobenius_norm(ad.sub(ad.constant(N), n_res))
