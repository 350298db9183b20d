"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every op builds a ``Tensor`` that remembers its parents and a closure that
pushes the output gradient back to them. ``Tensor.backward`` walks the graph in
reverse topological order.
"""

from __future__ import annotations

import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf

ArrayLike = Union[np.ndarray, float, int]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        parents: Tuple["Tensor", ...] = (),
        backward: Optional[Callable[[np.ndarray], None]] = None,
    ) -> None:
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True)
        else:
            self.grad += grad

    def backward(self) -> None:
        """Backpropagate from a scalar output."""

        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar output, got shape {self.data.shape}")

        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    # interior nodes are never read again
                    node.grad = None

    def __add__(self, other: "TensorLike") -> "Tensor":
        return add(self, other)

    def __radd__(self, other: "TensorLike") -> "Tensor":
        return add(other, self)

    def __sub__(self, other: "TensorLike") -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: "TensorLike") -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: "TensorLike") -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: "TensorLike") -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: "TensorLike") -> "Tensor":
        return div(self, other)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


TensorLike = Union[Tensor, ArrayLike]


def as_tensor(value: TensorLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data: np.ndarray) -> Tensor:
    return Tensor(data, requires_grad=True)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _result(
    data: np.ndarray, parents: Sequence[Tensor], backward: Callable[[np.ndarray], None]
) -> Tensor:
    needs = any(parent.requires_grad for parent in parents)
    if not needs:
        return Tensor(data)
    return Tensor(data, requires_grad=True, parents=tuple(parents), backward=backward)


def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(grad: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(grad, b.shape))

    return _result(a.data + b.data, (a, b), backward)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(grad: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-grad, b.shape))

    return _result(a.data - b.data, (a, b), backward)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(grad: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(grad * a.data, b.shape))

    return _result(a.data * b.data, (a, b), backward)


def div(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def backward(grad: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-grad * out / b.data, b.shape))

    return _result(out, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    def backward(grad: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(grad @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ grad)

    return _result(a.data @ b.data, (a, b), backward)


def power(a: Tensor, exponent: float) -> Tensor:
    if exponent == 0:
        return Tensor(np.ones_like(a.data))
    out = a.data**exponent

    def backward(grad: np.ndarray) -> None:
        a._accumulate(grad * exponent * a.data ** (exponent - 1))

    return _result(out, (a,), backward)


def log(a: Tensor) -> Tensor:
    def backward(grad: np.ndarray) -> None:
        a._accumulate(grad / a.data)

    return _result(np.log(a.data), (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    out = np.empty_like(a.data)
    positive = a.data >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-a.data[positive]))
    exp_x = np.exp(a.data[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)

    def backward(grad: np.ndarray) -> None:
        a._accumulate(grad * out * (1.0 - out))

    return _result(out, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward(grad: np.ndarray) -> None:
        a._accumulate(grad * (1.0 - out * out))

    return _result(out, (a,), backward)


def gelu(a: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x) with the Gaussian CDF."""

    x = a.data
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))

    def backward(grad: np.ndarray) -> None:
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        a._accumulate(grad * (cdf + x * pdf))

    return _result(x * cdf, (a,), backward)


def softmax(a: Tensor) -> Tensor:
    """Row-wise softmax over the last axis."""

    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=-1, keepdims=True)

    def backward(grad: np.ndarray) -> None:
        inner = (grad * out).sum(axis=-1, keepdims=True)
        a._accumulate(out * (grad - inner))

    return _result(out, (a,), backward)


def clip(a: Tensor, low: float, high: float) -> Tensor:
    inside = (a.data >= low) & (a.data <= high)

    def backward(grad: np.ndarray) -> None:
        a._accumulate(grad * inside)

    return _result(np.clip(a.data, low, high), (a,), backward)


def minimum(a: Tensor, bound: np.ndarray) -> Tensor:
    """Elementwise min against a constant; ties route the gradient to ``a``."""

    chosen = a.data <= bound

    def backward(grad: np.ndarray) -> None:
        a._accumulate(grad * chosen)

    return _result(np.where(chosen, a.data, bound), (a,), backward)


def maximum(a: Tensor, bound: np.ndarray) -> Tensor:
    chosen = a.data >= bound

    def backward(grad: np.ndarray) -> None:
        a._accumulate(grad * chosen)

    return _result(np.where(chosen, a.data, bound), (a,), backward)


def smooth_l1(a: Tensor, target: np.ndarray) -> Tensor:
    """Elementwise smooth-L1 of ``a - target`` with the transition at 1."""

    diff = a.data - target
    small = np.abs(diff) < 1.0
    out = np.where(small, 0.5 * diff * diff, np.abs(diff) - 0.5)

    def backward(grad: np.ndarray) -> None:
        a._accumulate(grad * np.where(small, diff, np.sign(diff)))

    return _result(out, (a,), backward)


def total(a: Tensor) -> Tensor:
    def backward(grad: np.ndarray) -> None:
        a._accumulate(np.broadcast_to(grad, a.shape))

    return _result(np.asarray(a.data.sum()), (a,), backward)


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    def backward(grad: np.ndarray) -> None:
        a._accumulate(grad.reshape(a.shape))

    return _result(a.data.reshape(shape), (a,), backward)


def take_rows(a: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.int64)

    def backward(grad: np.ndarray) -> None:
        full = np.zeros_like(a.data)
        np.add.at(full, index, grad)
        a._accumulate(full)

    return _result(a.data[index], (a,), backward)


def pick(a: Tensor, columns: np.ndarray) -> Tensor:
    """Select ``a[i, columns[i]]`` for every row i."""

    columns = np.asarray(columns, dtype=np.int64)
    rows = np.arange(a.shape[0])

    def backward(grad: np.ndarray) -> None:
        full = np.zeros_like(a.data)
        full[rows, columns] = grad
        a._accumulate(full)

    return _result(a.data[rows, columns], (a,), backward)


def row_slice(a: Tensor, start: int, stop: int) -> Tensor:
    def backward(grad: np.ndarray) -> None:
        full = np.zeros_like(a.data)
        full[start:stop] = grad
        a._accumulate(full)

    return _result(a.data[start:stop], (a,), backward)


def col_slice(a: Tensor, start: int, stop: int) -> Tensor:
    def backward(grad: np.ndarray) -> None:
        full = np.zeros_like(a.data)
        full[:, start:stop] = grad
        a._accumulate(full)

    return _result(a.data[:, start:stop], (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(tensor) for tensor in tensors]
    sizes = [tensor.shape[axis] for tensor in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(grad: np.ndarray) -> None:
        for tensor, low, high in zip(tensors, bounds[:-1], bounds[1:]):
            if tensor.requires_grad:
                index = [slice(None)] * grad.ndim
                index[axis] = slice(int(low), int(high))
                tensor._accumulate(grad[tuple(index)])

    return _result(np.concatenate([tensor.data for tensor in tensors], axis=axis), tensors, backward)


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate equally-shaped (B, h) blocks into (len * B, h)."""

    return concat(tensors, axis=0)


def span_max(h: Tensor, starts: np.ndarray, ends: np.ndarray) -> Tensor:
    """Max-pool rows ``starts[i]..ends[i]`` (inclusive) of ``h`` for every span i."""

    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    width = int((ends - starts).max()) + 1 if starts.size else 1
    index = starts[:, None] + np.arange(width)[None, :]
    valid = index <= ends[:, None]
    index = np.where(valid, index, starts[:, None])
    window = h.data[index]
    window = np.where(valid[:, :, None], window, -np.inf)
    arg = window.argmax(axis=1)
    source_rows = np.take_along_axis(index, arg, axis=1)
    columns = np.broadcast_to(np.arange(h.shape[1])[None, :], source_rows.shape)
    out = h.data[source_rows, columns]

    def backward(grad: np.ndarray) -> None:
        full = np.zeros_like(h.data)
        np.add.at(full, (source_rows, columns), grad)
        h._accumulate(full)

    return _result(out, (h,), backward)


def dropout(a: Tensor, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when ``rng`` is None or the rate is 0."""

    if rng is None or rate <= 0.0:
        return a
    mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return mul(a, Tensor(mask))
