"""Define-by-run reverse-mode autodiff over float64 numpy arrays."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ParameterError

_DEBUG = False


def set_debug(flag: bool) -> None:
    """When on, every op checks its output for NaN/Inf."""
    global _DEBUG
    _DEBUG = bool(flag)


class Tensor:
    """Array node in a dynamically built computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence] | None = None
        self.op = "leaf"
        self.name = name

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_node(value, parents, backward_fn, op="custom") -> Tensor:
    """Create a node whose gradient is given by ``backward_fn``.

    ``backward_fn(out_grad)`` must return one gradient (or ``None``) per
    parent, each shaped like that parent's value. This is the hook used by
    layers with hand-written gradients, including the quantum layer.
    """
    out = Tensor(value)
    if _DEBUG and not np.all(np.isfinite(out.data)):
        raise NumericError(f"non-finite output from op '{op}'")
    parents = tuple(parents)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    out.op = op
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


def _broadcast_shape(a, b):
    try:
        return np.broadcast_shapes(a, b)
    except ValueError as exc:
        raise ParameterError(f"shape mismatch: {a} vs {b}") from exc


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    return make_node(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def neg(a) -> Tensor:
    return make_node(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    return make_node(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def power(a, p: float) -> Tensor:
    return make_node(a.data**p, (a,), lambda g: (g * p * a.data ** (p - 1),), "pow")


def matmul(a, b) -> Tensor:
    """Matrix product of 2-D operands (a leading batch dim on ``a`` is allowed)."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ParameterError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def bw(g):
        if a.ndim == 1:
            return g @ b.data.T, np.outer(a.data, g)
        return g @ b.data.T, a.data.T @ g

    return make_node(a.data @ b.data, (a, b), bw, "matmul")


def reshape(a, shape) -> Tensor:
    shape = tuple(shape)
    try:
        value = a.data.reshape(shape)
    except ValueError as exc:
        raise ParameterError(f"cannot reshape {a.shape} to {shape}") from exc
    return make_node(value, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def getitem(a, idx) -> Tensor:
    def bw(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return make_node(a.data[idx], (a,), bw, "slice")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        value = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ParameterError(f"concat shape mismatch: {[t.shape for t in tensors]}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return make_node(value, tensors, lambda g: tuple(np.split(g, bounds, axis=axis)), "concat")


def split(a: Tensor, k: int) -> list[Tensor]:
    """Partition the last dimension into ``k`` equal parts."""
    n = a.shape[-1]
    if k < 1 or n % k:
        raise ParameterError(f"cannot split last dim {n} into {k} equal parts")
    w = n // k
    return [getitem(a, (..., slice(i * w, (i + 1) * w))) for i in range(k)]


def reduce_sum(a, axis=None, keepdims=False) -> Tensor:
    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_node(a.data.sum(axis=axis, keepdims=keepdims), (a,), bw, "sum")


def reduce_mean(a, axis=None, keepdims=False) -> Tensor:
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return mul(reduce_sum(a, axis, keepdims), 1.0 / count)


def elementwise(a: Tensor, fn, dfn, op="map") -> Tensor:
    """Apply ``fn`` elementwise; ``dfn(x)`` gives the pointwise derivative."""
    return make_node(fn(a.data), (a,), lambda g: (g * dfn(a.data),), op)


def exp(a):
    return elementwise(a, np.exp, np.exp, "exp")


def log(a):
    return elementwise(a, np.log, lambda x: 1.0 / x, "log")


def tanh(a):
    return elementwise(a, np.tanh, lambda x: 1.0 - np.tanh(x) ** 2, "tanh")


def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(node) into ``.grad`` of every node needing it."""
    if loss.size != 1:
        raise ParameterError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topo_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
