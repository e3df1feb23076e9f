"""Reverse-mode automatic differentiation over numpy arrays."""

import contextlib

import numpy as np

from emostyle.errors import GraphConsumed, NonFiniteError, NonScalarLoss, ShapeMismatch

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference)."""
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values produced by {what}")


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """An n-d array that records the operations producing it.

    ``_backward`` maps the upstream gradient to a tuple with one entry per
    parent (``None`` where a parent needs no gradient).
    """

    def __init__(self, data, requires_grad=False, dtype=None, _parents=(), _backward=None, _op=""):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            arr = np.asarray(data)
            dtype = arr.dtype if np.issubdtype(arr.dtype, np.floating) else np.float32
        self.data = np.asarray(data, dtype=dtype)
        _check_finite(self.data, _op or "tensor construction")
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward = _backward
        self._op = _op
        self._consumed = False

    # construction helpers -------------------------------------------------
    @classmethod
    def _make(cls, data, parents, backward, op):
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            return cls(data, True, data.dtype, parents, backward, op)
        return cls(data, False, data.dtype, _op=op)

    def _lift(self, other):
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.dtype))

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data.copy(), dtype=self.dtype)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self._op or 'leaf'})"

    def __len__(self):
        return len(self.data)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        a, b = self, other

        def backward(g):
            return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

        return Tensor._make(a.data + b.data, (a, b), backward, "add")

    __radd__ = __add__

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        a, b = self, other

        def backward(g):
            return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

        return Tensor._make(a.data * b.data, (a, b), backward, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        a, b = self, other

        def backward(g):
            ga = _unbroadcast(g / b.data, a.shape)
            gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
            return ga, gb

        return Tensor._make(a.data / b.data, (a, b), backward, "div")

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, exponent):
        if isinstance(exponent, Tensor):
            raise TypeError("only constant exponents are supported")
        x = self

        def backward(g):
            return (g * exponent * x.data ** (exponent - 1),)

        return Tensor._make(x.data**exponent, (x,), backward, "pow")

    def __matmul__(self, other):
        other = self._lift(other)
        a, b = self, other
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeMismatch(f"cannot matmul {a.shape} by {b.shape}")

        def backward(g):
            return g @ b.data.T, a.data.T @ g

        return Tensor._make(a.data @ b.data, (a, b), backward, "matmul")

    def __getitem__(self, index):
        x = self

        def backward(g):
            out = np.zeros_like(x.data)
            np.add.at(out, index, g)
            return (out,)

        return Tensor._make(np.asarray(x.data[index]), (x,), backward, "getitem")

    # reductions and shape -------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        x = self

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, x.shape).copy(),)

        return Tensor._make(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), backward, "sum")

    def mean(self, axis=None, keepdims=False):
        n = self.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        x = self
        try:
            out = x.data.reshape(shape)
        except ValueError as exc:
            raise ShapeMismatch(str(exc)) from None
        return Tensor._make(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")

    def transpose(self, *axes):
        axes = axes or tuple(reversed(range(self.ndim)))
        inverse = np.argsort(axes)
        return Tensor._make(self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),), "transpose")

    @property
    def T(self):
        return self.transpose()

    # autodiff -------------------------------------------------------------
    def graph(self):
        """Nodes reachable from this tensor in topological order (inputs first)."""
        order, seen = [], set()
        stack = [(self, False)]
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
                if id(p) not in seen:
                    stack.append((p, False))
        return order

    def backward(self, retain_graph=False):
        if self.size != 1:
            raise NonScalarLoss(f"backward needs a scalar loss, got shape {self.shape}")
        if self._consumed:
            raise GraphConsumed("backward already ran on this graph; rebuild the forward pass")
        if not self.requires_grad:
            raise ValueError("loss does not depend on any tensor that requires grad")

        order = self.graph()
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pg = np.asarray(pg, dtype=parent.dtype)
                _check_finite(pg, f"backward of {node._op}")
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

        if not retain_graph:
            self._consumed = True
            for node in order:
                if node._parents:
                    node._parents, node._backward = (), None


def tensor(data, requires_grad=False, dtype=np.float32):
    return Tensor(np.array(data, dtype=dtype), requires_grad=requires_grad)
