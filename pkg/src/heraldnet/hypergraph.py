"""Hypergraph topology and its spectral operators.

Everything here is plain numpy over an immutable hypergraph: incidence
matrix H (|V| x |E|), weighted degrees, the one-hop propagation matrix
N = Dv^{-1/2} H W De^{-1} H^T Dv^{-1/2} and the normalized Laplacian
L = I - N. The differentiable soft-incidence counterpart lives in
:mod:`heraldnet.adaptor`; this module is the fixed-topology side.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DataValidationError, DegenerateNodeError

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Hypergraph:
    """Node count, hyperedge membership lists, positive hyperedge weights."""

    num_nodes: int
    hyperedges: tuple[tuple[int, ...], ...]
    edge_weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.num_nodes < 1:
            raise DataValidationError(f"num_nodes must be >= 1, got {self.num_nodes}")
        edges = tuple(tuple(sorted(set(int(v) for v in e))) for e in self.hyperedges)
        object.__setattr__(self, "hyperedges", edges)
        for j, e in enumerate(edges):
            if len(e) == 0:
                raise DataValidationError(f"hyperedge {j} is empty")
            if e[0] < 0 or e[-1] >= self.num_nodes:
                raise DataValidationError(
                    f"hyperedge {j} references node outside [0, {self.num_nodes}): {e}")
        if self.edge_weights is None:
            w = np.ones(len(edges), dtype=np.float64)
        else:
            w = np.asarray(self.edge_weights, dtype=np.float64)
        if w.shape != (len(edges),):
            raise DataValidationError(
                f"need one weight per hyperedge: {w.shape} vs {len(edges)} edges")
        if len(edges) and not (w > 0).all():
            raise DataValidationError("hyperedge weights must be strictly positive")
        object.__setattr__(self, "edge_weights", w)

    @property
    def num_edges(self) -> int:
        return len(self.hyperedges)

    def incidence(self) -> np.ndarray:
        """Dense binary |V| x |E| incidence matrix."""
        H = np.zeros((self.num_nodes, self.num_edges), dtype=np.float64)
        for j, e in enumerate(self.hyperedges):
            H[list(e), j] = 1.0
        return H

    def isolated_nodes(self) -> list[int]:
        seen = np.zeros(self.num_nodes, dtype=bool)
        for e in self.hyperedges:
            seen[list(e)] = True
        return [int(i) for i in np.flatnonzero(~seen)]

    def permuted(self, perm: np.ndarray) -> "Hypergraph":
        """Relabel nodes: new index of old node v is perm[v]."""
        perm = np.asarray(perm)
        edges = tuple(tuple(int(perm[v]) for v in e) for e in self.hyperedges)
        return Hypergraph(self.num_nodes, edges, self.edge_weights.copy())


def patch_isolated_nodes(hg: Hypergraph) -> tuple[Hypergraph, list[int]]:
    """Give each isolated node a singleton self-hyperedge of weight 1.

    Keeps Dv invertible; the patched node list is returned so loaders can log
    it as a dataset warning.
    """
    isolated = hg.isolated_nodes()
    if not isolated:
        return hg, []
    edges = hg.hyperedges + tuple((v,) for v in isolated)
    weights = np.concatenate([hg.edge_weights, np.ones(len(isolated))])
    logger.warning("patched %d isolated node(s) with singleton self-hyperedges: %s",
                   len(isolated), isolated[:10])
    return Hypergraph(hg.num_nodes, edges, weights), isolated


def degrees(H: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weighted node degrees d(v) = sum_e w(e) h(v,e) and hyperedge degrees
    delta(e) = sum_v h(v,e)."""
    H = np.asarray(H, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if H.ndim != 2 or weights.shape != (H.shape[1],):
        raise ContractError(
            f"incidence {H.shape} and weights {weights.shape} are inconsistent")
    d_v = H @ weights
    d_e = H.sum(axis=0)
    zero_nodes = np.flatnonzero(d_v <= 0)
    if zero_nodes.size:
        raise DegenerateNodeError(
            f"node(s) {zero_nodes.tolist()} have zero degree; "
            "patch isolated nodes before building spectral operators")
    if (d_e <= 0).any():
        raise DataValidationError("a hyperedge has zero degree (empty column)")
    return d_v, d_e


def propagation_matrix(H: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """N = Dv^{-1/2} H W De^{-1} H^T Dv^{-1/2}, computed by row/column scaling."""
    H = np.asarray(H, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    d_v, d_e = degrees(H, weights)
    A = H * (d_v ** -0.5)[:, None]
    return (A * (weights / d_e)[None, :]) @ A.T


def laplacian(H: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Normalized Laplacian L = I - N."""
    N = propagation_matrix(H, weights)
    return np.eye(N.shape[0]) - N


def eigen_check(L: np.ndarray) -> np.ndarray:
    """Sorted eigenvalues of a symmetric operator; raises if L is not
    symmetric to within SYMMETRY_TOL. Test-oracle only, never in the
    forward path."""
    L = np.asarray(L, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ContractError(f"eigen_check requires a square matrix, got {L.shape}")
    asym = np.abs(L - L.T).max() if L.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ContractError(f"matrix is asymmetric beyond {SYMMETRY_TOL}: {asym:.3e}")
    return np.linalg.eigvalsh(0.5 * (L + L.T))


@dataclass(frozen=True)
class SpectralOperators:
    """The fixed-topology quantities consumed by the model: degree vectors,
    propagation matrix N and Laplacian L = I - N."""

    node_degrees: np.ndarray
    edge_degrees: np.ndarray
    propagation: np.ndarray
    laplacian: np.ndarray


def spectral_operators(hg: Hypergraph) -> SpectralOperators:
    H = hg.incidence()
    d_v, d_e = degrees(H, hg.edge_weights)
    N = propagation_matrix(H, hg.edge_weights)
    return SpectralOperators(d_v, d_e, N, np.eye(hg.num_nodes) - N)
