"""HGNN-style network assembly.

Each layer updates features as X' = beta(N_hat X W), where N_hat is the
fixed propagation matrix, a per-layer adaptor blend, or a single shared
blend (fast mode). Node classification returns per-node logits; graph
classification adds a permutation-invariant summation readout and a linear
head.

Weight initialization draws layer weights first and adaptor parameters
last, so two models built from the same seed share identical layer weights
regardless of adaptor mode. That is what makes the a = 0 degeneration
bit-exact against the adaptor-free model.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .adaptor import (DEFAULT_SIGMA, HeraldOutput, HeraldParams, a_schedule,
                      herald_forward, topology_regularizer)
from .autodiff import Tensor
from .errors import ConfigError, ShapeError
from .hypergraph import Hypergraph, SpectralOperators, spectral_operators

CHECKPOINT_FORMAT = "heraldnet-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    herald: bool
    activation: str  # "relu" | "identity"


@dataclass
class ModelConfig:
    """Architecture and adaptor placement.

    ``herald_layers`` uses 1-based layer indices and defaults to the latter
    two layers. ``readout`` must be "sum" for graph-level classification and
    "none" for node-level. ``fixed_a`` is used when the cosine schedule is
    switched off.
    """

    in_dim: int
    num_classes: int
    hidden_dim: int = 64
    num_layers: int = 3
    herald_mode: str = "off"  # off | on | fast
    herald_layers: tuple[int, ...] | None = None
    herald_width: int | None = None
    sigma: float = DEFAULT_SIGMA
    dropout: float = 0.5
    bias: bool = True
    readout: str = "none"  # none | sum
    use_a_schedule: bool = True
    fixed_a: float = 0.1

    def __post_init__(self):
        if self.in_dim < 1 or self.num_classes < 1 or self.hidden_dim < 1:
            raise ConfigError("dimensions must be >= 1")
        if self.num_layers < 1:
            raise ConfigError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.herald_mode not in ("off", "on", "fast"):
            raise ConfigError(f"unknown herald mode {self.herald_mode!r}")
        if self.readout not in ("none", "sum"):
            raise ConfigError(f"unknown readout {self.readout!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not 0.0 <= self.fixed_a <= 1.0:
            raise ConfigError(f"fixed_a must lie in [0, 1], got {self.fixed_a}")
        if self.herald_layers is not None:
            self.herald_layers = tuple(int(l) for l in self.herald_layers)
            for l in self.herald_layers:
                if not 1 <= l <= self.num_layers:
                    raise ConfigError(
                        f"herald layer {l} outside depth {self.num_layers}")
        if self.herald_width is None:
            self.herald_width = self.hidden_dim

    def resolved_herald_layers(self) -> tuple[int, ...]:
        if self.herald_layers is not None:
            return self.herald_layers
        if self.num_layers == 1:
            return (1,)
        return (self.num_layers - 1, self.num_layers)

    def layer_specs(self) -> list[LayerSpec]:
        instrumented = set(self.resolved_herald_layers()) \
            if self.herald_mode != "off" else set()
        specs = []
        for l in range(1, self.num_layers + 1):
            in_dim = self.in_dim if l == 1 else self.hidden_dim
            if self.readout == "sum":
                out_dim, act = self.hidden_dim, "relu"
            else:
                last = l == self.num_layers
                out_dim = self.num_classes if last else self.hidden_dim
                act = "identity" if last else "relu"
            specs.append(LayerSpec(in_dim, out_dim, l in instrumented, act))
        return specs

    def blend_strength(self, layer_index: int) -> float:
        return a_schedule(layer_index) if self.use_a_schedule else self.fixed_a


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)))


class HGNNModel:
    """A stack of spectral convolution layers with optional incidence
    adaptors, plus an optional summation readout head."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self._init_rng = np.random.default_rng(seed)
        self._dropout_rng = np.random.default_rng((seed, 0xD0))
        self.seed = seed

        specs = config.layer_specs()
        self._specs = specs
        self.layer_weights: list[Tensor] = []
        self.layer_biases: list[Tensor] = []
        for spec in specs:
            self.layer_weights.append(
                _glorot(self._init_rng, spec.in_dim, spec.out_dim))
            if config.bias:
                self.layer_biases.append(Tensor(np.zeros(spec.out_dim)))
        if config.readout == "sum":
            self.head_weight = _glorot(self._init_rng, config.hidden_dim,
                                       config.num_classes)
            self.head_bias = Tensor(np.zeros(config.num_classes)) \
                if config.bias else None
        else:
            self.head_weight = None
            self.head_bias = None

        # Adaptor parameters are drawn after all layer weights so seed-matched
        # models agree on the backbone across adaptor modes.
        self.herald_params: dict[int, HeraldParams] = {}
        if config.herald_mode == "on":
            for l in config.resolved_herald_layers():
                self.herald_params[l] = HeraldParams.init(
                    self._init_rng, specs[l - 1].in_dim, config.herald_width,
                    config.sigma)
        elif config.herald_mode == "fast":
            build = min(config.resolved_herald_layers())
            self.herald_params[build] = HeraldParams.init(
                self._init_rng, specs[build - 1].in_dim, config.herald_width,
                config.sigma)

    # -- parameter plumbing -------------------------------------------------

    def parameters(self) -> list[tuple[str, Tensor]]:
        named: list[tuple[str, Tensor]] = []
        for i, w in enumerate(self.layer_weights, start=1):
            named.append((f"layer{i}.weight", w))
        for i, b in enumerate(self.layer_biases, start=1):
            named.append((f"layer{i}.bias", b))
        if self.head_weight is not None:
            named.append(("head.weight", self.head_weight))
            if self.head_bias is not None:
                named.append(("head.bias", self.head_bias))
        for l in sorted(self.herald_params):
            for name, t in self.herald_params[l].tensors():
                named.append((f"herald{l}.{name}", t))
        return named

    def parameter_count(self) -> int:
        return sum(t.data.size for _, t in self.parameters())

    def zero_grad(self) -> None:
        for _, t in self.parameters():
            t.zero_grad()

    def state(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.parameters()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, t in self.parameters():
            if name not in state:
                raise ConfigError(f"state is missing parameter {name!r}")
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ShapeError(
                    f"parameter {name!r}: shape {arr.shape} != {t.data.shape}")
            t.data = arr.copy()

    # -- forward ------------------------------------------------------------

    def _layer(self, X: Tensor, layer_index: int, n_hat: Tensor | None,
               N: np.ndarray, training: bool) -> Tensor:
        """One feature update X' = beta(N_hat X W)."""
        cfg = self.config
        spec = self._specs[layer_index - 1]
        prop = n_hat if n_hat is not None else ad.constant(N)
        out = ad.matmul(prop, X)
        out = ad.matmul(out, self.layer_weights[layer_index - 1])
        if cfg.bias:
            out = ad.add_rowvec(out, self.layer_biases[layer_index - 1])
        if spec.activation == "relu":
            out = ad.relu(out)
            if training and cfg.dropout > 0.0:
                out = ad.dropout(out, cfg.dropout, self._dropout_rng)
        return out

    def _forward_nodes(self, X, hg: Hypergraph,
                       operators: SpectralOperators | None, training: bool
                       ) -> tuple[Tensor, list[HeraldOutput]]:
        cfg = self.config
        if operators is None:
            operators = spectral_operators(hg)
        N = operators.propagation
        x_t = X if isinstance(X, Tensor) else ad.constant(np.asarray(X))
        if x_t.ndim != 2 or x_t.shape[0] != hg.num_nodes:
            raise ShapeError(
                f"features {x_t.shape} do not fit |V|={hg.num_nodes}")
        if x_t.shape[1] != cfg.in_dim:
            raise ShapeError(
                f"feature width {x_t.shape[1]} != configured in_dim {cfg.in_dim}")

        fast_build = (min(cfg.resolved_herald_layers())
                      if cfg.herald_mode == "fast" else None)
        outputs: list[HeraldOutput] = []
        shared: Tensor | None = None
        current = x_t
        for l in range(1, cfg.num_layers + 1):
            n_hat: Tensor | None = None
            if cfg.herald_mode == "on" and l in self.herald_params:
                out = herald_forward(current, hg, N, self.herald_params[l],
                                     cfg.blend_strength(l))
                outputs.append(out)
                n_hat = out.n_hat
            elif fast_build is not None:
                if l == fast_build:
                    out = herald_forward(current, hg, N,
                                         self.herald_params[fast_build],
                                         cfg.blend_strength(l))
                    outputs.append(out)
                    shared = out.n_hat
                n_hat = shared  # None before the build layer
            current = self._layer(current, l, n_hat, N, training)
        return current, outputs

    def forward_node(self, X, hg: Hypergraph,
                     operators: SpectralOperators | None = None,
                     training: bool = False, with_reg: bool = False):
        """Per-node class logits (|V| x C). With ``with_reg``, also returns
        the list of topology regularizer terms, one per adaptor pass."""
        if self.config.readout != "none":
            raise ConfigError("node forward requires readout='none'")
        logits, outputs = self._forward_nodes(X, hg, operators, training)
        if not with_reg:
            return logits
        if operators is None:
            operators = spectral_operators(hg)
        regs = [topology_regularizer(operators.propagation, out.n_res)
                for out in outputs]
        return logits, regs

    def forward_graph(self, X, hg: Hypergraph,
                      operators: SpectralOperators | None = None,
                      training: bool = False, with_reg: bool = False):
        """Graph-level logits (1 x C): node pipeline, summation readout,
        linear head."""
        if self.config.readout != "sum":
            raise ConfigError("graph forward requires readout='sum'")
        nodes, outputs = self._forward_nodes(X, hg, operators, training)
        pooled = ad.matmul(ad.constant(np.ones((1, hg.num_nodes))), nodes)
        logits = ad.matmul(pooled, self.head_weight)
        if self.head_bias is not None:
            logits = ad.add_rowvec(logits, self.head_bias)
        if not with_reg:
            return logits
        if operators is None:
            operators = spectral_operators(hg)
        regs = [topology_regularizer(operators.propagation, out.n_res)
                for out in outputs]
        return logits, regs

    # -- checkpointing -------------------------------------------------------

    def checkpoint_dict(self) -> dict:
        params = {
            name: {"shape": list(t.data.shape),
                   "data": t.data.reshape(-1).tolist()}
            for name, t in self.parameters()
        }
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "seed": self.seed,
            "config": asdict(self.config),
            "parameters": params,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.checkpoint_dict()))

    @classmethod
    def load(cls, path) -> "HGNNModel":
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ConfigError(f"not a model checkpoint: {path}")
        cfg_dict = dict(doc["config"])
        if cfg_dict.get("herald_layers") is not None:
            cfg_dict["herald_layers"] = tuple(cfg_dict["herald_layers"])
        model = cls(ModelConfig(**cfg_dict), seed=doc.get("seed", 0))
        state = {
            name: np.array(entry["data"], dtype=np.float64
                           ).reshape(entry["shape"])
            for name, entry in doc["parameters"].items()
        }
        model.load_state(state)
        return model
