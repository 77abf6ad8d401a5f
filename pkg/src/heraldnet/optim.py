"""First-order optimizers over named parameter lists.

Both optimizers read ``tensor.grad`` as produced by the tape's backward pass
and apply L2 weight decay by adding ``weight_decay * param`` to the gradient.
Parameters whose grad is None (unreached by the loss) are left untouched.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .errors import ConfigError


class SGD:
    def __init__(self, params: list[tuple[str, Tensor]], lr: float,
                 weight_decay: float = 0.0):
        if lr < 0:
            raise ConfigError(f"learning rate must be >= 0, got {lr}")
        self.params = params
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)

    def step(self) -> None:
        for _, p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            p.data = p.data - self.lr * g


class Adam:
    """Adam with bias correction; moments keyed by parameter name."""

    def __init__(self, params: list[tuple[str, Tensor]], lr: float,
                 weight_decay: float = 0.0, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0:
            raise ConfigError(f"learning rate must be >= 0, got {lr}")
        self.params = params
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros_like(p.data) for name, p in params}
        self._v = {name: np.zeros_like(p.data) for name, p in params}

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for name, p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m = self._m[name] = self.beta1 * self._m[name] + (1 - self.beta1) * g
            v = self._v[name] = self.beta2 * self._v[name] + (1 - self.beta2) * (g * g)
            update = self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            p.data = p.data - update


def build_optimizer(kind: str, params: list[tuple[str, Tensor]], lr: float,
                    weight_decay: float):
    if kind == "adam":
        return Adam(params, lr=lr, weight_decay=weight_decay)
    if kind == "sgd":
        return SGD(params, lr=lr, weight_decay=weight_decay)
    raise ConfigError(f"unknown optimizer {kind!r}")
