"""Dense tensors with reverse-mode automatic differentiation.

Every differentiable operation produces a new :class:`Tensor` that remembers
its operands and a closure mapping the output gradient to operand gradients.
:func:`backward` replays those closures in reverse creation order.
"""

from __future__ import annotations

import contextlib
import itertools
import threading
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible with an operation."""


class GraphError(RuntimeError):
    """Misuse of the recorded graph (double backward, non-scalar loss, ...)."""


_state = threading.local()
_counter = itertools.count()


def _grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, finite differences)."""
    prev = _grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    """N-dimensional array with an optional gradient buffer.

    ``data`` is a numpy array; ``grad`` stays ``None`` until a backward pass
    writes it (leaves only).  Interior nodes keep ``_parents`` and
    ``_backward`` until the graph is consumed.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_seq", "_consumed")
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind not in "fc":
            arr = arr.astype(np.float64 if dtype is None else dtype)
        if arr.ndim and min(arr.shape) < 1:
            raise ShapeError(f"tensor extents must be >= 1, got {arr.shape}")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward: Callable | None = None
        self._seq = next(_counter)
        self._consumed = False

    # -- introspection -----------------------------------------------------
    @property
    def shape(self) -> tuple:
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

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # -- operator sugar (implemented in functional) ------------------------
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False) -> "Tensor":
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False) -> "Tensor":
        return mean(self, axis, keepdims)


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def make_node(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    """Wrap an op result; records the node only if some parent needs gradients.

    ``backward(g)`` must return one gradient (or ``None``) per parent.
    """
    out = Tensor(data)
    if _grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _topo_order(root: Tensor) -> list[Tensor]:
    seen = set()
    nodes = []
    stack = [root]
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        nodes.append(t)
        for p in t._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append(p)
    # creation order is a valid topological order of a DAG built forward
    nodes.sort(key=lambda t: t._seq, reverse=True)
    return nodes


def backward(loss: Tensor, inputs: Iterable[Tensor] | None = None) -> None:
    """Reverse-mode sweep from a scalar ``loss``.

    Gradients land in ``.grad`` of every reachable leaf.  Leaves listed in
    ``inputs`` but not reachable receive zeros.  A graph may be swept once;
    a leaf that already holds a gradient is rejected (no implicit
    accumulation across calls; clear with :func:`zero_grad`).
    """
    if loss.data.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise GraphError("backward was already called on this graph")
    inputs = list(inputs) if inputs is not None else []
    for leaf in inputs:
        if leaf.grad is not None:
            raise GraphError("leaf already holds a gradient; call zero_grad before backward")

    if loss.requires_grad:
        grads = {id(loss): np.ones_like(loss.data)}
        for node in _topo_order(loss):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._consumed:
                raise GraphError("graph segment was already swept by an earlier backward")
            if node.is_leaf:
                if node.grad is not None:
                    raise GraphError("leaf already holds a gradient; call zero_grad before backward")
                node.grad = g
                continue
            pgrads = node._backward(g)
            for p, pg in zip(node._parents, pgrads):
                if pg is None or not p.requires_grad:
                    continue
                if id(p) in grads:
                    grads[id(p)] = grads[id(p)] + pg
                else:
                    grads[id(p)] = pg
            node._backward = None
            node._parents = ()
            node._consumed = True
    for leaf in inputs:
        if leaf.grad is None:
            leaf.grad = np.zeros_like(leaf.data)


def zero_grad(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None


# ---------------------------------------------------------------------------
# elementwise arithmetic with numpy broadcasting


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    sa, sb = a.shape, b.shape
    return make_node(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    if not isinstance(a, Tensor):
        a = as_tensor(a, like=b)
    b = as_tensor(b, like=a)
    sa, sb = a.shape, b.shape
    return make_node(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    ad, bd = a.data, b.data

    def bw(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return make_node(ad * bd, (a, b), bw)


def div(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    ad, bd = a.data, b.data

    def bw(g):
        return _unbroadcast(g / bd, ad.shape), _unbroadcast(-g * ad / (bd * bd), bd.shape)

    return make_node(ad / bd, (a, b), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes (numpy broadcasting)."""
    ad, bd = a.data, b.data
    if ad.shape[-1] != bd.shape[-2]:
        raise ShapeError(f"matmul inner extents differ: {ad.shape} @ {bd.shape}")

    def bw(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape)
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape)
        return ga, gb

    return make_node(ad @ bd, (a, b), bw)


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = x.shape

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return make_node(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), bw)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return tsum(x, axis, keepdims) * (1.0 / n)


def absolute(x: Tensor) -> Tensor:
    xd = x.data
    # subgradient 0 at ties
    return make_node(np.abs(xd), (x,), lambda g: (g * np.sign(xd),))


def square(x: Tensor) -> Tensor:
    xd = x.data
    return make_node(xd * xd, (x,), lambda g: (2.0 * g * xd,))


def sqrt(x: Tensor) -> Tensor:
    y = np.sqrt(x.data)
    return make_node(y, (x,), lambda g: (g * 0.5 / y,))


# ---------------------------------------------------------------------------
# layout operations (pure index shuffles, no arithmetic in the forward path)


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return make_node(np.ascontiguousarray(x.data.transpose(axes)), (x,),
                     lambda g: (g.transpose(inv),))


def concat(xs: Sequence[Tensor], axis: int) -> Tensor:
    sizes = [t.shape[axis] for t in xs]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_node(np.concatenate([t.data for t in xs], axis=axis), tuple(xs), bw)


def crop(x: Tensor, index: tuple) -> Tensor:
    """Basic slicing ``x[index]`` (slices and ints only)."""
    shape = x.shape

    def bw(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[index] = g
        return (full,)

    return make_node(np.ascontiguousarray(x.data[index]), (x,), bw)


def pad(x: Tensor, widths, mode: str = "constant") -> Tensor:
    """``np.pad`` with ``constant`` (zero) or ``reflect`` mode."""
    widths = [tuple(w) for w in widths]
    if mode == "constant":
        inner = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, x.shape))
        return make_node(np.pad(x.data, widths), (x,), lambda g: (g[inner],))
    if mode != "reflect":
        raise ValueError(f"unsupported pad mode {mode!r}")
    # source index per padded position, per axis; backward scatter-adds
    maps = [np.pad(np.arange(n), w, mode="reflect") for n, w in zip(x.shape, widths)]
    out = x.data[np.ix_(*maps)]
    shape = x.shape

    def bw(g):
        for ax, m in enumerate(maps):
            if len(m) == shape[ax] and np.array_equal(m, np.arange(shape[ax])):
                continue
            acc = np.zeros(g.shape[:ax] + (shape[ax],) + g.shape[ax + 1:], dtype=g.dtype)
            np.add.at(acc, (slice(None),) * ax + (m,), g)
            g = acc
        return (g,)

    return make_node(out, (x,), bw)


def roll(x: Tensor, shifts: tuple, axes: tuple) -> Tensor:
    neg = tuple(-s for s in shifts)
    return make_node(np.roll(x.data, shifts, axes), (x,), lambda g: (np.roll(g, neg, axes),))


def take(table: Tensor, index: np.ndarray) -> Tensor:
    """Gather rows ``table[index]`` along axis 0; gradients scatter-add back."""
    index = np.asarray(index)
    shape = table.shape

    def bw(g):
        acc = np.zeros(shape, dtype=g.dtype)
        np.add.at(acc, index, g)
        return (acc,)

    return make_node(table.data[index], (table,), bw)
