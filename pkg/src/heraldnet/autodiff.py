"""Dense float64 tensors with tape-based reverse-mode differentiation.

The operation set is deliberately small: it is exactly the closure needed by
the hypergraph convolution model and the incidence adaptor. Tensors are
0-d (scalars), 1-d (vectors) or 2-d (matrices); broadcasting is restricted
to scalar-vs-tensor, plus a few named row/column primitives
(``scale_rows``, ``scale_cols``, ``add_rowvec``) whose gradients are spelled
out explicitly.

Recording is opt-in: operations executed inside a ``with Tape() as tape:``
block are recorded, everything else is plain forward arithmetic. A fresh
tape per training step supports data-dependent graphs (the adaptor rebuilds
its soft incidence every step).
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, NumericalError, ShapeError

_TAPE_STACK: list["Tape"] = []
_CHECK_FINITE = True


def set_finite_checks(enabled: bool) -> bool:
    """Toggle NaN/Inf policing on primitive outputs. Returns previous value."""
    global _CHECK_FINITE
    previous = _CHECK_FINITE
    _CHECK_FINITE = bool(enabled)
    return previous


@contextlib.contextmanager
def finite_checks(enabled: bool):
    """Context manager variant of :func:`set_finite_checks`."""
    previous = set_finite_checks(enabled)
    try:
        yield
    finally:
        set_finite_checks(previous)


def _check_finite(data: np.ndarray, op: str) -> None:
    if _CHECK_FINITE and not np.isfinite(data).all():
        raise NumericalError(f"{op} produced a non-finite value")


class Tensor:
    """A dense float64 array, optionally participating in a tape.

    ``grad`` is populated by :meth:`Tape.backward` and has the same shape as
    ``data``. ``node_id`` is the tensor's identity on the most recent tape
    that touched it (leaves included).
    """

    __slots__ = ("data", "grad", "node_id", "name")

    def __init__(self, data, name: str | None = None):
        arr = np.array(data, dtype=np.float64, order="C", copy=True)
        if arr.ndim > 2:
            raise ShapeError(f"tensors are at most 2-d, got shape {arr.shape}")
        _check_finite(arr, "tensor construction")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.node_id: int | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    # Operator sugar. Python scalars go through the non-differentiable
    # constant paths (scale / add_const); Tensors through the tracked ops.
    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return add_const(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return add_const(self, -float(other))

    def __rsub__(self, other):
        return add_const(neg(self), float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


class TapeEntry:
    """One primitive application: output, parents, and the pullback."""

    __slots__ = ("op", "out", "parents", "backward")

    def __init__(self, op: str, out: Tensor, parents: tuple[Tensor, ...],
                 backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]):
        self.op = op
        self.out = out
        self.parents = parents
        self.backward = backward


class Tape:
    """Ordered record of primitive operations.

    Parents always precede the operations that consume them, so the backward
    pass is a single reverse sweep.
    """

    def __init__(self):
        self.entries: list[TapeEntry] = []
        self._next_id = 0

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPE_STACK.pop()

    def __len__(self) -> int:
        return len(self.entries)

    def _assign_id(self, t: Tensor) -> None:
        t.node_id = self._next_id
        self._next_id += 1

    def record(self, op: str, out: Tensor, parents: tuple[Tensor, ...],
               backward: Callable) -> None:
        for p in parents:
            if p.node_id is None:
                self._assign_id(p)  # leaf first touched by this tape
        self._assign_id(out)
        self.entries.append(TapeEntry(op, out, parents, backward))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into ``grad`` of every reachable tensor.

        ``loss`` must be a scalar recorded on this tape.
        """
        if loss.ndim != 0:
            raise ContractError(
                f"backward requires a scalar loss, got shape {loss.shape}")
        if not any(e.out is loss for e in self.entries):
            raise ContractError("loss tensor was not recorded on this tape")
        loss.grad = np.ones((), dtype=np.float64)
        for entry in reversed(self.entries):
            g = entry.out.grad
            if g is None:
                continue
            parent_grads = entry.backward(g)
            for parent, pg in zip(entry.parents, parent_grads):
                if pg is None:
                    continue
                if parent.grad is None:
                    parent.grad = pg
                else:
                    parent.grad = parent.grad + pg


def active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _emit(op: str, data: np.ndarray, parents: tuple[Tensor, ...],
          backward: Callable) -> Tensor:
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    # asarray, not ascontiguousarray: the latter promotes 0-d scalars to 1-d
    out.data = np.asarray(data, dtype=np.float64)
    out.grad = None
    out.node_id = None
    out.name = None
    tape = active_tape()
    if tape is not None:
        tape.record(op, out, parents, backward)
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> None:
    # equal shapes, or one side a scalar
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeError(f"{op}: operand shapes {a.shape} and {b.shape} differ")


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # collapse a broadcast gradient back onto a scalar operand
    if grad.shape == shape:
        return grad
    return np.sum(grad).reshape(shape)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-d tensors."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul requires matrices, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions disagree, {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        return g @ bd.T, ad.T @ g

    return _emit("matmul", ad @ bd, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "add")
    ash, bsh = a.shape, b.shape

    def backward(g):
        return _reduce_to(g, ash), _reduce_to(g, bsh)

    return _emit("add", a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "sub")
    ash, bsh = a.shape, b.shape

    def backward(g):
        return _reduce_to(g, ash), _reduce_to(-g, bsh)

    return _emit("sub", a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product (scalar broadcast allowed)."""
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "mul")
    ad, bd = a.data, b.data

    def backward(g):
        return _reduce_to(g * bd, ad.shape), _reduce_to(g * ad, bd.shape)

    return _emit("mul", ad * bd, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return _emit("neg", -a.data, (a,), lambda g: (-g,))


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def backward(g):
        return (g * out_data,)

    return _emit("exp", out_data, (a,), backward)


def square(a: Tensor) -> Tensor:
    ad = a.data
    return _emit("square", ad * ad, (a,), lambda g: (g * (2.0 * ad),))


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a non-differentiable Python constant."""
    c = float(c)
    return _emit("scale", a.data * c, (a,), lambda g: (g * c,))


def add_const(a: Tensor, c: float) -> Tensor:
    """Add a non-differentiable Python constant."""
    c = float(c)
    return _emit("add_const", a.data + c, (a,), lambda g: (g,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward(g):
        return (g * mask,)

    return _emit("relu", np.where(mask, a.data, 0.0), (a,), backward)


def pow_const(a: Tensor, c: float) -> Tensor:
    """Elementwise power by a constant exponent. Base must stay positive
    whenever ``c`` is fractional or negative; degrees on the soft incidence
    path satisfy this by construction."""
    c = float(c)
    out_data = np.power(a.data, c)
    ad = a.data

    def backward(g):
        return (g * (c * np.power(ad, c - 1.0)),)

    return _emit("pow_const", out_data, (a,), backward)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose requires a matrix, got shape {a.shape}")
    return _emit("transpose", a.data.T, (a,), lambda g: (g.T,))


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax of a matrix, stabilized by row-max subtraction."""
    if a.ndim != 2:
        raise ShapeError(f"softmax_rows requires a matrix, got shape {a.shape}")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        # rows of the softmax Jacobian: y * (g - <g, y>)
        dot = np.sum(g * out_data, axis=1, keepdims=True)
        return (out_data * (g - dot),)

    return _emit("softmax_rows", out_data, (a,), backward)


def sum_all(a: Tensor) -> Tensor:
    if a.data.size == 0:
        raise ContractError("sum over an empty tensor")
    shape = a.shape

    def backward(g):
        return (np.broadcast_to(g, shape).astype(np.float64, copy=True),)

    return _emit("sum", np.sum(a.data), (a,), backward)


def mean_all(a: Tensor) -> Tensor:
    if a.data.size == 0:
        raise ContractError("mean over an empty tensor")
    n = a.data.size
    shape = a.shape

    def backward(g):
        return (np.full(shape, float(g) / n),)

    return _emit("mean", np.mean(a.data), (a,), backward)


def sum_rows(a: Tensor) -> Tensor:
    """Sum each row of a matrix, returning a vector of length m."""
    if a.ndim != 2:
        raise ShapeError(f"sum_rows requires a matrix, got shape {a.shape}")
    if a.shape[1] == 0:
        raise ContractError("sum_rows over an empty axis")
    m, n = a.shape

    def backward(g):
        return (np.repeat(g.reshape(m, 1), n, axis=1),)

    return _emit("sum_rows", a.data.sum(axis=1), (a,), backward)


def mean_rows(a: Tensor) -> Tensor:
    """Mean of each row of a matrix, returning a vector of length m."""
    if a.ndim != 2:
        raise ShapeError(f"mean_rows requires a matrix, got shape {a.shape}")
    if a.shape[1] == 0:
        raise ContractError("mean_rows over an empty axis")
    m, n = a.shape

    def backward(g):
        return (np.repeat(g.reshape(m, 1) / n, n, axis=1),)

    return _emit("mean_rows", a.data.mean(axis=1), (a,), backward)


def _as_vector(v: Tensor, length: int, op: str) -> np.ndarray:
    # accept shape (k,) or (k, 1) so column parameters can scale directly
    if v.shape == (length,):
        return v.data
    if v.shape == (length, 1):
        return v.data[:, 0]
    raise ShapeError(f"{op}: expected vector of length {length}, got {v.shape}")


def scale_rows(a: Tensor, v: Tensor) -> Tensor:
    """Multiply row i of a matrix by v[i]."""
    if a.ndim != 2:
        raise ShapeError(f"scale_rows requires a matrix, got shape {a.shape}")
    vd = _as_vector(v, a.shape[0], "scale_rows")
    ad = a.data
    vshape = v.shape

    def backward(g):
        gv = np.sum(g * ad, axis=1)
        return g * vd[:, None], gv.reshape(vshape)

    return _emit("scale_rows", ad * vd[:, None], (a, v), backward)


def scale_cols(a: Tensor, v: Tensor) -> Tensor:
    """Multiply column j of a matrix by v[j]."""
    if a.ndim != 2:
        raise ShapeError(f"scale_cols requires a matrix, got shape {a.shape}")
    vd = _as_vector(v, a.shape[1], "scale_cols")
    ad = a.data
    vshape = v.shape

    def backward(g):
        gv = np.sum(g * ad, axis=0)
        return g * vd[None, :], gv.reshape(vshape)

    return _emit("scale_cols", ad * vd[None, :], (a, v), backward)


def add_rowvec(a: Tensor, b: Tensor) -> Tensor:
    """Add a length-n vector to every row of an m-by-n matrix (bias add)."""
    if a.ndim != 2:
        raise ShapeError(f"add_rowvec requires a matrix, got shape {a.shape}")
    bd = _as_vector(b, a.shape[1], "add_rowvec")
    bshape = b.shape

    def backward(g):
        return g, np.sum(g, axis=0).reshape(bshape)

    return _emit("add_rowvec", a.data + bd[None, :], (a, b), backward)


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout. Draws from ``rng``, so determinism is the caller's
    seed discipline."""
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return _emit("dropout", a.data.copy(), (a,), lambda g: (g,))
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)

    def backward(g):
        return (g * keep,)

    return _emit("dropout", a.data * keep, (a,), backward)


def masked_cross_entropy(logits: Tensor, labels: np.ndarray,
                         mask: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of ``labels`` over the rows where ``mask``
    is true. Labels and mask are constants, not differentiated."""
    if logits.ndim != 2:
        raise ShapeError(
            f"masked_cross_entropy requires logit rows, got {logits.shape}")
    labels = np.asarray(labels)
    mask = np.asarray(mask, dtype=bool)
    if labels.shape != (logits.shape[0],) or mask.shape != (logits.shape[0],):
        raise ShapeError(
            "labels/mask must have one entry per logit row: "
            f"logits {logits.shape}, labels {labels.shape}, mask {mask.shape}")
    n = int(mask.sum())
    if n == 0:
        raise ContractError("masked_cross_entropy over an empty mask")
    rows = logits.data[mask]
    y = labels[mask]
    shifted = rows - rows.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    nll = lse - shifted[np.arange(n), y]
    out_data = np.array(nll.mean())
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    full_shape = logits.shape

    def backward(g):
        grad_rows = probs.copy()
        grad_rows[np.arange(n), y] -= 1.0
        grad = np.zeros(full_shape)
        grad[mask] = grad_rows * (float(g) / n)
        return (grad,)

    return _emit("masked_cross_entropy", out_data, (logits,), backward)


def frobenius_norm(a: Tensor) -> Tensor:
    """sqrt of the sum of squared entries. The norm has a kink at 0; the
    backward takes the zero subgradient there (same convention as relu)."""
    ad_ = a.data
    norm = float(np.sqrt(np.sum(ad_ * ad_)))

    def backward(g):
        if norm == 0.0:
            return (np.zeros_like(ad_),)
        return (ad_ * (float(g) / norm),)

    return _emit("frobenius_norm", np.array(norm), (a,), backward)


def constant(data, name: str | None = None) -> Tensor:
    """A leaf tensor that never receives gradient (plain data wrapper)."""
    return Tensor(data, name=name)
