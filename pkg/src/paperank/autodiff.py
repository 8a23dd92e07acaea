"""Minimal reverse-mode automatic differentiation over numpy arrays.

The networks and losses in this package are small (hidden sizes in the tens,
batch sizes in the tens), so a tape of numpy float64 operations is fast enough
and keeps gradients exact with respect to the computation actually performed.
Every op stores a closure that maps the output gradient to gradients for its
parents; ``Tensor.backward`` walks the tape in reverse topological order.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class Tensor:
    """A node in the computation graph wrapping a float64 ndarray."""

    __slots__ = ("data", "grad", "parents", "_backward")

    def __init__(
        self,
        data,
        parents: Sequence["Tensor"] = (),
        backward: Callable[[np.ndarray], Iterable[np.ndarray]] | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.parents = tuple(parents)
        self._backward = backward
        self.grad: np.ndarray | None = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate gradients into every node reachable from this one."""
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen:
                    stack.append((p, False))

        self.grad = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=np.float64)
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node.parents, node._backward(node.grad)):
                if g is None:
                    continue
                g = _unbroadcast(g, parent.data.shape)
                parent.grad = g if parent.grad is None else parent.grad + g

    # -- elementwise arithmetic -------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        return Tensor(self.data + other.data, (self, other), lambda g: (g, g))

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        other = as_tensor(other)
        return Tensor(self.data - other.data, (self, other), lambda g: (g, -g))

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        return Tensor(
            self.data * other.data,
            (self, other),
            lambda g: (g * other.data, g * self.data),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        return Tensor(
            self.data / other.data,
            (self, other),
            lambda g: (g / other.data, -g * self.data / other.data**2),
        )

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent: float):
        # overflow to inf is legitimate here: divergence detection relies on it
        with np.errstate(over="ignore"):
            value = self.data**exponent
        return Tensor(
            value,
            (self,),
            lambda g: (g * exponent * self.data ** (exponent - 1),),
        )

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data

        def backward(g):
            if a.ndim == 1 and b.ndim == 1:
                return g * b, g * a
            if a.ndim == 2 and b.ndim == 1:
                return np.outer(g, b), a.T @ g
            if a.ndim == 1 and b.ndim == 2:
                return b @ g, np.outer(a, g)
            return g @ b.T, a.T @ g

        return Tensor(a @ b, (self, other), backward)

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    # -- transcendental ----------------------------------------------------

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor(out, (self,), lambda g: (g * (1.0 - out**2),))

    def sigmoid(self):
        out = _sigmoid(self.data)
        return Tensor(out, (self,), lambda g: (g * out * (1.0 - out),))

    def exp(self):
        out = np.exp(self.data)
        return Tensor(out, (self,), lambda g: (g * out,))

    def log(self):
        return Tensor(np.log(self.data), (self,), lambda g: (g / self.data,))

    def sqrt(self):
        out = np.sqrt(self.data)
        return Tensor(out, (self,), lambda g: (g / (2.0 * out),))

    # -- reductions and reshaping -----------------------------------------

    def sum(self):
        return Tensor(
            np.sum(self.data), (self,), lambda g: (np.broadcast_to(g, self.data.shape).copy(),)
        )

    def mean(self):
        n = self.data.size
        return Tensor(
            np.mean(self.data),
            (self,),
            lambda g: (np.broadcast_to(g / n, self.data.shape).copy(),),
        )

    def __getitem__(self, idx):
        def backward(g):
            out = np.zeros_like(self.data)
            np.add.at(out, idx, g)
            return (out,)

        return Tensor(self.data[idx], (self,), backward)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out broadcast axes so ``grad`` matches the parent's shape."""
    grad = np.asarray(grad, dtype=np.float64)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate 1-D tensors."""
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.size for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(g[offsets[i] : offsets[i + 1]] for i in range(len(tensors)))

    return Tensor(np.concatenate([t.data for t in tensors]), tensors, backward)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equal-shape tensors along a new leading axis."""
    tensors = [as_tensor(t) for t in tensors]

    def backward(g):
        return tuple(g[i] for i in range(len(tensors)))

    return Tensor(np.stack([t.data for t in tensors]), tensors, backward)


def logsumexp(t: Tensor) -> Tensor:
    """Scalar log-sum-exp of a 1-D tensor, stabilized by max subtraction."""
    x = t.data
    m = np.max(x)
    out = m + np.log(np.sum(np.exp(x - m)))
    softmax = np.exp(x - out)
    return Tensor(out, (t,), lambda g: (g * softmax,))


def rev_logcumsumexp(t: Tensor) -> Tensor:
    """out[i] = log sum_{k >= i} exp(x[k]) for a 1-D tensor."""
    x = t.data
    out = np.logaddexp.accumulate(x[::-1])[::-1]

    def backward(g):
        # d out[i] / d x[k] = exp(x[k] - out[i]) for k >= i, 0 otherwise
        n = x.size
        diff = x[None, :] - out[:, None]  # (i, k)
        diff[np.tril_indices(n, k=-1)] = -np.inf
        return (np.exp(diff).T @ g,)

    return Tensor(out, (t,), backward)


def softplus(t: Tensor) -> Tensor:
    out = np.logaddexp(0.0, t.data)
    return Tensor(out, (t,), lambda g: (g * _sigmoid(t.data),))
