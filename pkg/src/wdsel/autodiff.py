"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

A Tensor records its parents and a vector-Jacobian closure when produced by
an operation.  Creation order doubles as topological order (the graph is
append-only), so backward() walks the reachable nodes in reverse creation
order exactly once.  Only the primitives the selection model needs exist;
broadcasting is limited to what add/mul require for bias terms and row/column
scaling.
"""
from __future__ import annotations

import itertools

import numpy as np

from .errors import InputError, StructureError, WdselError

_SEQ = itertools.count()


class NonFiniteError(WdselError):
    """A forward operation produced NaN or Inf."""


def _finite(data: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{op} produced non-finite values")
    return data


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp", "_seq",
                 "_velocity")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None
        self._seq = next(_SEQ)
        self._velocity: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; constants are wrapped on the fly
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __sub__(self, other):
        return add(self, mul(_wrap(other), _wrap(-1.0)))

    def __rsub__(self, other):
        return add(_wrap(other), mul(self, _wrap(-1.0)))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], vjp, op: str) -> Tensor:
    out = Tensor(_finite(data, op))
    out._parents = parents
    out._vjp = vjp
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data + b.data
    except ValueError:
        raise StructureError(f"add shapes incompatible: {a.shape} vs {b.shape}")

    def vjp(g):
        return ((a, _unbroadcast(g, a.data.shape)),
                (b, _unbroadcast(g, b.data.shape)))

    return _node(data, (a, b), vjp, "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data * b.data
    except ValueError:
        raise StructureError(f"mul shapes incompatible: {a.shape} vs {b.shape}")

    def vjp(g):
        return ((a, _unbroadcast(g * b.data, a.data.shape)),
                (b, _unbroadcast(g * a.data, b.data.shape)))

    return _node(data, (a, b), vjp, "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise StructureError(f"matmul supports 1-D/2-D only: {a.shape} @ {b.shape}")
    a2 = a.data if a.data.ndim == 2 else a.data[None, :]
    b2 = b.data if b.data.ndim == 2 else b.data[:, None]
    if a2.shape[1] != b2.shape[0]:
        raise StructureError(f"matmul shapes incompatible: {a.shape} @ {b.shape}")
    y2 = a2 @ b2
    data = y2
    if a.data.ndim == 1:
        data = data[0]
    if b.data.ndim == 1:
        data = data[..., 0] if a.data.ndim == 2 else data[0]

    def vjp(g):
        g2 = np.atleast_2d(g)
        if a.data.ndim == 1 and b.data.ndim == 1:
            g2 = g2.reshape(1, 1)
        elif a.data.ndim == 1:
            g2 = g2.reshape(1, b2.shape[1])
        elif b.data.ndim == 1:
            g2 = g2.reshape(a2.shape[0], 1)
        da = g2 @ b2.T
        db = a2.T @ g2
        return ((a, da.reshape(a.data.shape)), (b, db.reshape(b.data.shape)))

    return _node(data, (a, b), vjp, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise StructureError(f"transpose expects a matrix, got shape {a.shape}")

    def vjp(g):
        return ((a, g.T),)

    return _node(a.data.T.copy(), (a,), vjp, "transpose")


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise StructureError(f"cannot reshape {a.shape} to {shape}")

    def vjp(g):
        return ((a, g.reshape(a.data.shape)),)

    return _node(data.copy(), (a,), vjp, "reshape")


def conv1d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of x [C_in, L] with kernels w [C_out, C_in, k]."""
    if x.data.ndim != 2 or w.data.ndim != 3:
        raise StructureError(
            f"conv1d expects input [C_in, L] and kernel [C_out, C_in, k], "
            f"got {x.shape} and {w.shape}"
        )
    cin, length = x.data.shape
    cout, cin_w, k = w.data.shape
    if cin != cin_w:
        raise StructureError(
            f"conv1d channel mismatch: input has {cin}, kernel expects {cin_w}"
        )
    if stride < 1 or padding < 0:
        raise InputError(f"invalid stride {stride} or padding {padding}")
    xp = np.pad(x.data, ((0, 0), (padding, padding)))
    lp = xp.shape[1]
    if lp < k:
        raise StructureError(f"conv1d window {k} exceeds padded length {lp}")
    lout = (lp - k) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)[:, ::stride]
    cols = windows.transpose(0, 2, 1).reshape(cin * k, lout)
    w2 = w.data.reshape(cout, cin * k)
    data = w2 @ cols

    def vjp(g):
        dw = (g @ cols.T).reshape(w.data.shape)
        dcols = w2.T @ g
        dwin = dcols.reshape(cin, k, lout)
        dxp = np.zeros_like(xp)
        for j in range(k):
            dxp[:, j:j + stride * lout:stride] += dwin[:, j, :]
        dx = dxp[:, padding:padding + length] if padding else dxp
        return ((x, dx), (w, dw))

    return _node(data, (x, w), vjp, "conv1d")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def vjp(g):
        return ((a, g * mask),)

    return _node(np.where(mask, a.data, 0.0), (a,), vjp, "relu")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def vjp(g):
        return ((a, g * out * (1.0 - out)),)

    return _node(out, (a,), vjp, "sigmoid")


def _axis_count(shape: tuple[int, ...], axis) -> int:
    if axis is None:
        return int(np.prod(shape)) if shape else 1
    return shape[axis]


def tsum(a: Tensor, axis: int | None = None) -> Tensor:
    data = a.data.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return ((a, np.broadcast_to(g, a.data.shape).copy()),)
        ge = np.expand_dims(g, axis)
        return ((a, np.broadcast_to(ge, a.data.shape).copy()),)

    return _node(data, (a,), vjp, "sum")


def tmean(a: Tensor, axis: int | None = None) -> Tensor:
    n = _axis_count(a.data.shape, axis)
    data = a.data.mean(axis=axis)

    def vjp(g):
        if axis is None:
            return ((a, np.broadcast_to(g / n, a.data.shape).copy()),)
        ge = np.expand_dims(g, axis) / n
        return ((a, np.broadcast_to(ge, a.data.shape).copy()),)

    return _node(data, (a,), vjp, "mean")


def l1_norm(a: Tensor) -> Tensor:
    data = np.abs(a.data).sum()

    def vjp(g):
        return ((a, g * np.sign(a.data)),)

    return _node(data, (a,), vjp, "l1_norm")


def log2(a: Tensor) -> Tensor:
    data = np.log2(a.data)

    def vjp(g):
        return ((a, g / (a.data * np.log(2.0))),)

    return _node(data, (a,), vjp, "log2")


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)

    def vjp(g):
        return ((a, g / (2.0 * out)),)

    return _node(out, (a,), vjp, "sqrt")


def reciprocal(a: Tensor) -> Tensor:
    out = 1.0 / a.data

    def vjp(g):
        return ((a, -g * out * out),)

    return _node(out, (a,), vjp, "reciprocal")


def inner_product(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise StructureError(
            f"inner_product needs equal shapes, got {a.shape} vs {b.shape}"
        )
    data = float(np.vdot(a.data, b.data))

    def vjp(g):
        return ((a, g * b.data), (b, g * a.data))

    return _node(data, (a, b), vjp, "inner_product")


def diag_part(a: Tensor) -> Tensor:
    if a.data.ndim != 2 or a.data.shape[0] != a.data.shape[1]:
        raise StructureError(f"diag_part expects a square matrix, got {a.shape}")

    def vjp(g):
        return ((a, np.diag(g)),)

    return _node(np.diag(a.data).copy(), (a,), vjp, "diag_part")


def stop_gradient_mask(t: Tensor, mask: np.ndarray) -> Tensor:
    """Forward identity; backward multiplies the incoming gradient by mask."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != t.data.shape:
        raise StructureError(
            f"mask shape {mask.shape} does not match tensor shape {t.shape}"
        )

    def vjp(g):
        return ((t, g * mask),)

    return _node(t.data.copy(), (t,), vjp, "stop_gradient_mask")


# ---------------------------------------------------------------------------
# backward + optimizer
# ---------------------------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Populate .grad on every requires_grad tensor the loss depends on.

    Reachable parameters with no gradient flow (masked or dead paths) get
    explicit zeros; tensors outside the loss graph are left untouched.
    """
    if loss.data.size != 1:
        raise InputError(f"backward needs a scalar loss, got shape {loss.shape}")
    seen: dict[int, Tensor] = {}
    stack = [loss]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen[id(node)] = node
        stack.extend(node._parents)
    order = sorted(seen.values(), key=lambda t: t._seq, reverse=True)
    buf: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in order:
        g = buf.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g.copy() if node.grad is None else node.grad + g
        if node._vjp is None:
            continue
        for parent, contrib in node._vjp(g):
            key = id(parent)
            if key in buf:
                buf[key] = buf[key] + contrib
            else:
                buf[key] = np.asarray(contrib, dtype=np.float64)
    for node in order:
        if node.requires_grad and node.grad is None:
            node.grad = np.zeros_like(node.data)


def sgd_step(params: list[Tensor], learning_rate: float,
             momentum: float = 0.0) -> None:
    """p <- p - lr * grad (with optional heavy-ball momentum); grads cleared."""
    for p in params:
        if p.grad is None:
            raise InputError(
                "sgd_step found a parameter without a gradient; run backward first"
            )
    for p in params:
        if momentum > 0.0:
            if p._velocity is None:
                p._velocity = np.zeros_like(p.data)
            p._velocity = momentum * p._velocity + p.grad
            p.data = p.data - learning_rate * p._velocity
        else:
            p.data = p.data - learning_rate * p.grad
        p.grad = None
