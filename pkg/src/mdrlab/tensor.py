"""Dense float64 tensors with reverse-mode differentiation.

Every primitive builds a graph node holding its parents and a closure that
maps the output gradient to parent gradients (define-by-run; the graph is
rebuilt on every forward pass). ``backward`` walks the recorded graph in
reverse topological order and deposits gradients on the leaves.

Subgradient conventions: relu/hinge at 0 -> 0, abs at 0 -> 0. ``sqrt`` is
differentiated as-is; callers that may hit 0 add a small epsilon first
(the distance kernels do).
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NonFiniteError

# Every op validates its result; flip off only when profiling.
CHECK_FINITE = True


class Tensor:
    """One node of the computation graph: a float64 array plus backward hook."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _grad_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        if CHECK_FINITE and not np.isfinite(self.data).all():
            raise NonFiniteError(f"non-finite values in tensor {name or '<anon>'}")
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = tuple(_parents)
        self._grad_fn = _grad_fn

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    # operator sugar; all routing goes through the module-level primitives
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

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None):
        return tmean(self, axis=axis)

    def abs(self):
        return tabs(self)

    def sqrt(self):
        return tsqrt(self)

    def relu(self):
        return relu(self)


def _coerce(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient over the axes numpy broadcast to produce it."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _elementwise(opname, a: Tensor, b: Tensor, fwd) -> np.ndarray:
    try:
        return fwd(a.data, b.data)
    except ValueError as exc:
        raise ConfigError(
            f"{opname}: incompatible shapes {a.shape} and {b.shape}"
        ) from exc


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out_data = _elementwise("add", a, b, np.add)

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor(out_data, _parents=(a, b), _grad_fn=grad_fn)


def sub(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out_data = _elementwise("sub", a, b, np.subtract)

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor(out_data, _parents=(a, b), _grad_fn=grad_fn)


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out_data = _elementwise("mul", a, b, np.multiply)

    def grad_fn(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor(out_data, _parents=(a, b), _grad_fn=grad_fn)


def div(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out_data = _elementwise("div", a, b, np.divide)

    def grad_fn(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return Tensor(out_data, _parents=(a, b), _grad_fn=grad_fn)


def matmul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ConfigError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out_data = a.data @ b.data

    def grad_fn(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor(out_data, _parents=(a, b), _grad_fn=grad_fn)


def relu(a) -> Tensor:
    a = _coerce(a)
    mask = a.data > 0.0

    def grad_fn(g):
        return (g * mask,)

    return Tensor(np.where(mask, a.data, 0.0), _parents=(a,), _grad_fn=grad_fn)


def hinge(a) -> Tensor:
    """max(x, 0) as used by the losses; same kernel and subgradient as relu."""
    return relu(a)


def tabs(a) -> Tensor:
    a = _coerce(a)
    sign = np.sign(a.data)  # sign(0) == 0, matching the abs'(0) = 0 convention

    def grad_fn(g):
        return (g * sign,)

    return Tensor(np.abs(a.data), _parents=(a,), _grad_fn=grad_fn)


def tsqrt(a) -> Tensor:
    a = _coerce(a)
    out_data = np.sqrt(a.data)

    def grad_fn(g):
        return (g * 0.5 / out_data,)

    return Tensor(out_data, _parents=(a,), _grad_fn=grad_fn)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = _coerce(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor(out_data, _parents=(a,), _grad_fn=grad_fn)


def tmean(a, axis=None) -> Tensor:
    a = _coerce(a)
    count = a.size if axis is None else a.shape[axis]
    out_data = a.data.mean(axis=axis)

    def grad_fn(g):
        g = np.asarray(g) / count
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor(out_data, _parents=(a,), _grad_fn=grad_fn)


def take(a, indices) -> Tensor:
    """Select rows (axis 0) by integer index; duplicate indices accumulate grads."""
    a = _coerce(a)
    idx = np.asarray(indices, dtype=np.int64)
    out_data = a.data[idx]

    def grad_fn(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        return (ga,)

    return Tensor(out_data, _parents=(a,), _grad_fn=grad_fn)


def backward(loss: Tensor, params=None) -> dict:
    """Reverse pass from a scalar loss.

    Fills ``.grad`` on every reachable tensor with ``requires_grad`` and
    returns a name -> gradient map. When a ParamStore is given, the map
    covers every stored parameter, with exact zeros for parameters the
    loss does not depend on.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")

    if params is not None:
        for tensor in params.tensors():
            tensor.grad = None

    # reverse topological order via iterative post-order DFS
    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    grads = {id(loss): np.ones_like(loss.data)}
    named = {}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g if node.grad is None else node.grad + g
            if node.name is not None:
                named[node.name] = node.grad
        if node._grad_fn is None:
            continue
        for parent, pg in zip(node._parents, node._grad_fn(g)):
            pid = id(parent)
            if pid in grads:
                grads[pid] = grads[pid] + pg
            else:
                grads[pid] = pg

    if params is not None:
        out = {}
        for name, tensor in params.items():
            out[name] = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        return out
    return named
