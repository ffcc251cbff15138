"""Minimal reverse-mode gradient engine on numpy arrays.

A Tensor wraps one float64 ndarray and remembers how it was produced;
backward() runs the tape in reverse topological order and accumulates
into .grad.  Broadcasting follows numpy; gradients are summed back over
the broadcast axes.  Only what the networks and losses here need is
implemented: elementwise arithmetic, matmul, a few activations,
reductions, slicing, reshape, concat, clip, minimum, and detach (the
stop-gradient operator).
"""

import numpy as np


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    # -- graph construction -------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    @staticmethod
    def _lift(value):
        return value if isinstance(value, Tensor) else Tensor(value)

    def _accumulate(self, grad):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        other = self._lift(other)

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.shape))

        return self._make(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            self._accumulate(-g)

        return self._make(-self.data, (self,), backward)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        other = self._lift(other)

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.shape))

        return self._make(self.data * other.data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g / other.data, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(
                    -g * self.data / (other.data * other.data), other.shape))

        return self._make(self.data / other.data, (self, other), backward)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __matmul__(self, other):
        other = self._lift(other)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g @ other.data.T)
            if other.requires_grad:
                other._accumulate(self.data.T @ g)

        return self._make(self.data @ other.data, (self, other), backward)

    # -- elementwise functions ---------------------------------------------

    def exp(self):
        value = np.exp(self.data)

        def backward(g):
            self._accumulate(g * value)

        return self._make(value, (self,), backward)

    def log(self):
        def backward(g):
            self._accumulate(g / self.data)

        return self._make(np.log(self.data), (self,), backward)

    def tanh(self):
        value = np.tanh(self.data)

        def backward(g):
            self._accumulate(g * (1.0 - value * value))

        return self._make(value, (self,), backward)

    def sigmoid(self):
        value = 1.0 / (1.0 + np.exp(-self.data))

        def backward(g):
            self._accumulate(g * value * (1.0 - value))

        return self._make(value, (self,), backward)

    def elu(self):
        positive = self.data > 0.0
        value = np.where(positive, self.data, np.expm1(self.data))

        def backward(g):
            self._accumulate(g * np.where(positive, 1.0, value + 1.0))

        return self._make(value, (self,), backward)

    def square(self):
        def backward(g):
            self._accumulate(g * 2.0 * self.data)

        return self._make(self.data * self.data, (self,), backward)

    def sqrt(self):
        value = np.sqrt(self.data)

        def backward(g):
            self._accumulate(g * 0.5 / value)

        return self._make(value, (self,), backward)

    def clip(self, low, high):
        inside = (self.data >= low) & (self.data <= high)

        def backward(g):
            self._accumulate(g * inside)

        return self._make(np.clip(self.data, low, high), (self,), backward)

    # -- reductions -----------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.shape).copy())

        return self._make(self.data.sum(axis=axis, keepdims=keepdims),
                          (self,), backward)

    def mean(self, axis=None, keepdims=False):
        count = (self.size if axis is None
                 else np.prod([self.shape[a] for a in np.atleast_1d(axis)]))

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.shape) / count)

        return self._make(self.data.mean(axis=axis, keepdims=keepdims),
                          (self,), backward)

    # -- shape manipulation ---------------------------------------------

    def __getitem__(self, index):
        def backward(g):
            full = np.zeros_like(self.data)
            np.add.at(full, index, g)
            self._accumulate(full)

        return self._make(self.data[index], (self,), backward)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape

        def backward(g):
            self._accumulate(g.reshape(old))

        return self._make(self.data.reshape(shape), (self,), backward)

    def detach(self):
        """Stop-gradient: same values, no history."""
        return Tensor(self.data.copy())

    # -- backward pass ------------------------------------------------------

    def backward(self, grad=None):
        if grad is None:
            if self.size != 1:
                raise ValueError("backward() without a seed needs a scalar")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
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
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        self._accumulate(np.asarray(grad, dtype=np.float64))
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)


def parameter(data):
    return Tensor(data, requires_grad=True)


def concat(tensors, axis=0):
    tensors = [Tensor._lift(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(lo, hi)
                t._accumulate(g[tuple(index)])

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis),
                        tuple(tensors), backward)


def minimum(a, b):
    a, b = Tensor._lift(a), Tensor._lift(b)
    take_a = a.data <= b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * take_a, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~take_a, b.shape))

    return Tensor._make(np.minimum(a.data, b.data), (a, b), backward)


def maximum(a, b):
    a, b = Tensor._lift(a), Tensor._lift(b)
    take_a = a.data >= b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * take_a, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~take_a, b.shape))

    return Tensor._make(np.maximum(a.data, b.data), (a, b), backward)
