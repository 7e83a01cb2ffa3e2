"""Reverse-mode automatic differentiation over dense numpy arrays.

Small tape-based engine: every operation returns a new Tensor holding the
result plus a closure that routes the upstream gradient to its parents.
``backward`` topologically sorts the recorded graph from a scalar loss.
Reductions accumulate in float64 regardless of storage dtype.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

_CHECK_FINITE = True


def set_check_finite(flag: bool) -> None:
    """Toggle the NaN/Inf guard on op outputs (on by default)."""
    global _CHECK_FINITE
    _CHECK_FINITE = bool(flag)


class NonFiniteError(FloatingPointError):
    pass


def _validate(data: np.ndarray, context: str) -> None:
    if not _CHECK_FINITE or data.dtype.kind != "f":
        return
    # Single float64 reduction: any NaN/Inf poisons the sum, and float64
    # cannot overflow from finite float32 payloads of this size.
    if not math.isfinite(float(data.sum(dtype=np.float64))):
        raise NonFiniteError(f"non-finite values produced by {context}")


class Tensor:
    """N-d array with an optional gradient tape entry."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_grad_owned")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        _validate(self.data, "tensor construction")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = _parents
        self._backward: Callable[[np.ndarray], None] | None = _backward
        self._grad_owned = False

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, grad={self.requires_grad})"

    # -- arithmetic sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def constant(x, dtype=None) -> Tensor:
    arr = np.asarray(x, dtype=dtype)
    return Tensor(arr)


def _make(data, parents: Sequence[Tensor], backward, context: str) -> Tensor:
    req = any(p.requires_grad for p in parents)
    if not req:
        t = Tensor(data)
        _validate(t.data, context)
        return t
    t = Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward)
    _validate(t.data, context)
    return t


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    """Accumulate with copy-on-write: the first contribution is adopted as-is
    (it may alias another node's buffer or be a broadcast view); only a second
    contribution forces a private, writable buffer."""
    if not t.requires_grad:
        return
    if t.grad is None:
        if g.dtype != t.data.dtype:
            g = g.astype(t.data.dtype)
        t.grad = g
        t._grad_owned = False
    elif t._grad_owned:
        t.grad += g
    else:
        t.grad = t.grad + g
        t._grad_owned = True


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum the gradient over axes that were broadcast in the forward op."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(loss: Tensor) -> None:
    """Populate gradients of every reachable tensor from a scalar loss."""
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any tracked tensor")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# Elementwise arithmetic
#
# Python scalars stay raw so numpy's weak promotion keeps float32 results
# float32; wrapping them in 0-d arrays would silently upcast to float64.


def _is_scalar(x) -> bool:
    return isinstance(x, (int, float))


def add(a, b) -> Tensor:
    if _is_scalar(b) or _is_scalar(a):
        t, s = (a, b) if _is_scalar(b) else (b, a)
        t = as_tensor(t)
        out_data = t.data + s

        def bwd_s(g):
            _accumulate(t, g)

        return _make(out_data, (t,), bwd_s, "add")
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _make(out_data, (a, b), bwd, "add")


def sub(a, b) -> Tensor:
    if _is_scalar(b):
        return add(a, -b)
    if _is_scalar(a):
        t = as_tensor(b)
        out_data = a - t.data

        def bwd_s(g):
            _accumulate(t, -g)

        return _make(out_data, (t,), bwd_s, "sub")
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data - b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return _make(out_data, (a, b), bwd, "sub")


def mul(a, b) -> Tensor:
    if _is_scalar(b) or _is_scalar(a):
        t, s = (a, b) if _is_scalar(b) else (b, a)
        t = as_tensor(t)
        out_data = t.data * s

        def bwd_s(g):
            _accumulate(t, g * s)

        return _make(out_data, (t,), bwd_s, "mul")
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _make(out_data, (a, b), bwd, "mul")


def div(a, b) -> Tensor:
    if _is_scalar(b):
        return mul(a, 1.0 / b)
    if _is_scalar(a):
        t = as_tensor(b)
        out_data = a / t.data

        def bwd_s(g):
            _accumulate(t, -g * out_data / t.data)

        return _make(out_data, (t,), bwd_s, "div")
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data / b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g / b.data, a.shape))
        _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(out_data, (a, b), bwd, "div")


def pow_scalar(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    out_data = a.data**exponent

    def bwd(g):
        _accumulate(a, g * exponent * a.data ** (exponent - 1))

    return _make(out_data, (a,), bwd, "pow")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def bwd(g):
        _accumulate(a, g * out_data)

    return _make(out_data, (a,), bwd, "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out_data = np.log(a.data)

    def bwd(g):
        _accumulate(a, g / a.data)

    return _make(out_data, (a,), bwd, "log")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.sqrt(a.data)

    def bwd(g):
        _accumulate(a, g * 0.5 / out_data)

    return _make(out_data, (a,), bwd, "sqrt")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    out_data = a.data * mask

    def bwd(g):
        _accumulate(a, g * mask)

    return _make(out_data, (a,), bwd, "relu")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out_data = 1.0 / (1.0 + np.exp(-np.clip(a.data, -60, 60)))

    def bwd(g):
        _accumulate(a, g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), bwd, "sigmoid")


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient is 1 inside the window and 0 outside."""
    a = as_tensor(a)
    out_data = np.clip(a.data, lo, hi)
    mask = (a.data >= lo) & (a.data <= hi)

    def bwd(g):
        _accumulate(a, g * mask)

    return _make(out_data, (a,), bwd, "clip")


def softmax(a, axis: int = -1) -> Tensor:
    """Numerically stable softmax along one axis."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True, dtype=np.float64).astype(a.dtype)

    def bwd(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        _accumulate(a, (g - inner) * out_data)

    return _make(out_data, (a,), bwd, "softmax")


# ---------------------------------------------------------------------------
# Shape ops


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.reshape(shape)

    def bwd(g):
        _accumulate(a, g.reshape(a.shape))

    return _make(out_data, (a,), bwd, "reshape")


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    # Materialized, not a view: downstream BLAS is far faster on contiguous
    # operands than on permuted strides.
    out_data = np.ascontiguousarray(np.transpose(a.data, axes))
    inv = None if axes is None else np.argsort(axes)

    def bwd(g):
        _accumulate(a, np.ascontiguousarray(np.transpose(g, inv)))

    return _make(out_data, (a,), bwd, "transpose")


def take(a, idx) -> Tensor:
    """Basic and integer-array indexing with scatter-add backward."""
    a = as_tensor(a)
    out_data = a.data[idx]

    def bwd(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        _accumulate(a, buf)

    return _make(out_data, (a,), bwd, "take")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accumulate(t, piece)

    return _make(out_data, tuple(tensors), bwd, "concat")


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    out_data = np.broadcast_to(a.data, shape)

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))

    return _make(np.array(out_data), (a,), bwd, "broadcast_to")


# ---------------------------------------------------------------------------
# Reductions (float64 accumulation)


def reduce_sum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims, dtype=np.float64).astype(a.dtype)

    def bwd(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(gg, a.shape))

    return _make(out_data, (a,), bwd, "sum")


def reduce_mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.mean(axis=axis, keepdims=keepdims, dtype=np.float64).astype(a.dtype)
    if axis is None:
        denom = float(a.size)
    else:
        denom = float(
            np.prod([a.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))])
        )

    def bwd(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(gg, a.shape) / denom)

    return _make(out_data, (a,), bwd, "mean")


# ---------------------------------------------------------------------------
# Linear algebra


def _swapT(x: np.ndarray) -> np.ndarray:
    # Contiguous transpose: batched BLAS falls off the fast path on views.
    return np.ascontiguousarray(np.swapaxes(x, -1, -2))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g @ _swapT(b.data), a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(_swapT(a.data) @ g, b.shape))

    return _make(out_data, (a, b), bwd, "matmul")


def linear(x, weight, bias=None) -> Tensor:
    """y = x @ weight.T + bias with weight shaped (out_features, in_features).

    Fused primitive: leading axes are flattened so both directions run as
    single contiguous 2-d GEMMs.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    n_out, n_in = weight.shape
    if x.shape[-1] != n_in:
        raise ValueError(f"linear: input width {x.shape[-1]} != weight in {n_in}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, n_in)
    out = x2 @ weight.data.T
    bias_t = None if bias is None else as_tensor(bias)
    if bias_t is not None:
        out = out + bias_t.data
    out = out.reshape(*lead, n_out)
    parents = (x, weight) if bias_t is None else (x, weight, bias_t)

    def bwd(g):
        g2 = g.reshape(-1, n_out)
        if x.requires_grad:
            _accumulate(x, (g2 @ weight.data).reshape(x.shape))
        if weight.requires_grad:
            _accumulate(weight, g2.T @ x2)
        if bias_t is not None and bias_t.requires_grad:
            _accumulate(bias_t, g2.sum(axis=0))

    return _make(out, parents, bwd, "linear")


def frobenius_norm(a, axis=None) -> Tensor:
    """sqrt of the sum of squares, optionally over a subset of axes."""
    return sqrt(reduce_sum(mul(a, a), axis=axis))
