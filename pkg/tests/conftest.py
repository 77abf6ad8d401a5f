"""Shared fixtures and the finite-difference oracle.

The oracle re-evaluates a scalar-valued callable with perturbed copies of
one input array (central differences), independent of the tape machinery it
is used to check.
"""

import numpy as np
import pytest

from heraldnet import set_finite_checks


@pytest.fixture(autouse=True)
def _police_numerics():
    set_finite_checks(True)
    yield
    set_finite_checks(True)


def central_difference_grad(f, arrays, index, h=1e-5):
    """Gradient of ``f(arrays) -> float`` w.r.t. ``arrays[index]`` by central
    finite differences at step ``h``."""
    base = [np.array(a, dtype=np.float64) for a in arrays]
    target = base[index]
    grad = np.zeros_like(target)
    it = np.nditer(target, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        original = target[idx]
        target[idx] = original + h
        up = f(base)
        target[idx] = original - h
        down = f(base)
        target[idx] = original
        grad[idx] = (up - down) / (2.0 * h)
        it.iternext()
    return grad


def relative_error(analytic, numeric):
    """Elementwise |analytic - numeric| / max(1, |numeric|), reduced to max."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.abs(numeric))
    return float((np.abs(analytic - numeric) / denom).max())


GRAD_TOL = 1e-4
FD_STEP = 1e-5
