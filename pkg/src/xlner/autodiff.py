"""Minimal reverse-mode automatic differentiation over numpy float64
arrays; just the operations the tagger's forward pass needs."""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

ArrayLike = Union[np.ndarray, float, int]


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value: ArrayLike, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, scalar):
        return mul(self, 1.0 / float(scalar))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, shape):
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value + b.value

    def backward(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return Tensor(out_val, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.value, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value * b.value

    def backward(g):
        return (
            _unbroadcast(g * b.value, a.value.shape),
            _unbroadcast(g * a.value, b.value.shape),
        )

    return Tensor(out_val, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value @ b.value

    def backward(g):
        if a.value.ndim == 1:  # vector @ matrix
            return g @ b.value.T, np.outer(a.value, g)
        return g @ b.value.T, a.value.T @ g

    return Tensor(out_val, (a, b), backward)


def getitem(a: Tensor, key) -> Tensor:
    out_val = a.value[key]
    fancy = isinstance(key, (np.ndarray, list)) or (
        isinstance(key, tuple) and any(isinstance(k, (np.ndarray, list)) for k in key)
    )

    def backward(g):
        grad = np.zeros_like(a.value)
        if fancy:
            np.add.at(grad, key, g)
        else:
            grad[key] += g
        return (grad,)

    return Tensor(out_val, (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.value.shape
    return Tensor(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def tanh(a: Tensor) -> Tensor:
    out_val = np.tanh(a.value)
    return Tensor(out_val, (a,), lambda g: (g * (1.0 - out_val**2),))


def sigmoid(a: Tensor) -> Tensor:
    out_val = 1.0 / (1.0 + np.exp(-a.value))
    return Tensor(out_val, (a,), lambda g: (g * out_val * (1.0 - out_val),))


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate 1-D tensors."""
    sizes = [p.value.shape[0] for p in parts]
    out_val = np.concatenate([p.value for p in parts])

    def backward(g):
        grads = []
        offset = 0
        for size in sizes:
            grads.append(g[offset : offset + size])
            offset += size
        return tuple(grads)

    return Tensor(out_val, tuple(parts), backward)


def stack(rows: Sequence[Tensor]) -> Tensor:
    """Stack equal-length 1-D tensors into a matrix."""
    out_val = np.stack([r.value for r in rows])

    def backward(g):
        return tuple(g[i] for i in range(len(rows)))

    return Tensor(out_val, tuple(rows), backward)


def tsum(a: Tensor) -> Tensor:
    return Tensor(a.value.sum(), (a,), lambda g: (np.full_like(a.value, float(g)),))


def logsumexp(a: Tensor, axis: Optional[int] = None) -> Tensor:
    m = a.value.max(axis=axis, keepdims=True)
    shifted = np.exp(a.value - m)
    total = shifted.sum(axis=axis, keepdims=True)
    out_val = (np.log(total) + m) if axis is not None else (np.log(total) + m).item()
    softmax = shifted / total
    if axis is not None:
        out_val = np.squeeze(out_val, axis=axis)

    def backward(g):
        if axis is None:
            return (softmax * float(g),)
        return (softmax * np.expand_dims(g, axis),)

    return Tensor(out_val, (a,), backward)


def backward(root: Tensor) -> None:
    """Accumulate gradients of a scalar root into every reachable tensor."""
    if root.value.shape != ():
        raise ValueError("backward expects a scalar root")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack_: list[tuple[Tensor, bool]] = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack_.append((parent, False))

    root.grad = np.asarray(1.0)
    for node in reversed(order):
        if node._backward is None or node.grad is None:
            continue
        for parent, grad in zip(node._parents, node._backward(node.grad)):
            if parent.grad is None:
                parent.grad = np.zeros_like(parent.value)
            parent.grad = parent.grad + grad
