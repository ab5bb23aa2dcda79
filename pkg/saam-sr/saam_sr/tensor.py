"""Dense numpy-backed tensor with a dynamic reverse-mode tape.

Feature maps are NCHW (W fastest). Every op records its parents and a backward
closure; ``Tensor.backward`` replays the tape in reverse topological order and
sums gradients for tensors used more than once.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from typing import Any

import numpy as np
import numpy.typing as npt

from .errors import ArgumentError, DimensionError

Array = npt.NDArray[np.floating[Any]]
BackwardFn = Callable[[Array], Sequence[Array | None]]

_grad_enabled = True


@contextmanager
def no_grad() -> Iterator[None]:
    """Suspend tape recording inside the block."""
    global _grad_enabled  # noqa: PLW0603
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


def _as_array(data: Any, dtype: npt.DTypeLike | None) -> Array:
    if dtype is not None:
        return np.ascontiguousarray(data, dtype=dtype)
    arr = np.asarray(data)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float32)
    return np.ascontiguousarray(arr)


def _check_broadcast(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    """Allow equal shapes, scalar-with-tensor, and size-1 axes at equal rank."""
    if a == b:
        return a
    if int(np.prod(a)) == 1 and len(a) <= len(b):
        return b
    if int(np.prod(b)) == 1 and len(b) <= len(a):
        return a
    if len(a) == len(b) and all(x == y or 1 in (x, y) for x, y in zip(a, b, strict=True)):
        return tuple(max(x, y) for x, y in zip(a, b, strict=True))
    msg = f"cannot combine shapes {a} and {b}"
    raise DimensionError(msg)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum ``grad`` down to ``shape`` (inverse of the broadcasting above)."""
    if grad.shape == shape:
        return grad
    if int(np.prod(shape)) == 1:
        return np.asarray(grad.sum(), dtype=grad.dtype).reshape(shape)
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    return grad.sum(axis=axes, keepdims=True)


class Tensor:
    """N-d float array with an optional gradient slot.

    Model feature maps are rank 4 (N, C, H, W); dense routing parameters are
    rank 2 and losses are scalars.
    """

    __slots__ = ("_backward", "_parents", "data", "grad", "op", "requires_grad")

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        dtype: npt.DTypeLike | None = None,
    ) -> None:
        self.data: Array = _as_array(data, dtype)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self.op = "leaf"

    # ------------------------------------------------------------------
    # Construction helpers
    # ------------------------------------------------------------------

    @classmethod
    def from_op(
        cls,
        data: Array,
        parents: Sequence[Tensor],
        backward: BackwardFn,
        op: str,
    ) -> Tensor:
        """Wrap an op result, recording it on the tape when needed."""
        out = cls(data, dtype=data.dtype)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
            out.op = op
        return out

    def _lift(self, other: Tensor | float) -> Tensor:
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def dtype(self) -> np.dtype[Any]:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    def numpy(self) -> Array:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> Tensor:
        return Tensor(self.data.copy(), dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op})"

    # ------------------------------------------------------------------
    # Arithmetic
    # ------------------------------------------------------------------

    def __add__(self, other: Tensor | float) -> Tensor:
        b = self._lift(other)
        _check_broadcast(self.shape, b.shape)
        sa, sb = self.shape, b.shape

        def backward(g: Array) -> tuple[Array, Array]:
            return _unbroadcast(g, sa), _unbroadcast(g, sb)

        return Tensor.from_op(self.data + b.data, (self, b), backward, "add")

    def __radd__(self, other: float) -> Tensor:
        return self + other

    def __neg__(self) -> Tensor:
        return Tensor.from_op(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other: Tensor | float) -> Tensor:
        b = self._lift(other)
        _check_broadcast(self.shape, b.shape)
        sa, sb = self.shape, b.shape

        def backward(g: Array) -> tuple[Array, Array]:
            return _unbroadcast(g, sa), _unbroadcast(-g, sb)

        return Tensor.from_op(self.data - b.data, (self, b), backward, "sub")

    def __rsub__(self, other: float) -> Tensor:
        return self._lift(other) - self

    def __mul__(self, other: Tensor | float) -> Tensor:
        b = self._lift(other)
        _check_broadcast(self.shape, b.shape)
        a_data, b_data = self.data, b.data
        sa, sb = self.shape, b.shape

        def backward(g: Array) -> tuple[Array, Array]:
            return _unbroadcast(g * b_data, sa), _unbroadcast(g * a_data, sb)

        return Tensor.from_op(a_data * b_data, (self, b), backward, "mul")

    def __rmul__(self, other: float) -> Tensor:
        return self * other

    def __truediv__(self, other: Tensor | float) -> Tensor:
        b = self._lift(other)
        _check_broadcast(self.shape, b.shape)
        a_data, b_data = self.data, b.data
        sa, sb = self.shape, b.shape

        def backward(g: Array) -> tuple[Array, Array]:
            ga = g / b_data
            gb = -g * a_data / (b_data * b_data)
            return _unbroadcast(ga, sa), _unbroadcast(gb, sb)

        return Tensor.from_op(a_data / b_data, (self, b), backward, "div")

    def __rtruediv__(self, other: float) -> Tensor:
        return self._lift(other) / self

    def __pow__(self, exponent: float) -> Tensor:
        a_data = self.data

        def backward(g: Array) -> tuple[Array]:
            return (g * exponent * a_data ** (exponent - 1),)

        return Tensor.from_op(a_data**exponent, (self,), backward, "pow")

    def __matmul__(self, other: Tensor) -> Tensor:
        if self.ndim != 2 or other.ndim != 2 or self.shape[1] != other.shape[0]:
            msg = f"matmul needs (m,k)@(k,n), got {self.shape} and {other.shape}"
            raise DimensionError(msg)
        a_data, b_data = self.data, other.data

        def backward(g: Array) -> tuple[Array, Array]:
            return g @ b_data.T, a_data.T @ g

        return Tensor.from_op(a_data @ b_data, (self, other), backward, "matmul")

    def abs(self) -> Tensor:
        sign = np.sign(self.data)
        return Tensor.from_op(np.abs(self.data), (self,), lambda g: (g * sign,), "abs")

    def sqrt(self) -> Tensor:
        out = np.sqrt(self.data)
        return Tensor.from_op(out, (self,), lambda g: (g / (2.0 * out),), "sqrt")

    def square(self) -> Tensor:
        a_data = self.data
        return Tensor.from_op(
            a_data * a_data, (self,), lambda g: (2.0 * g * a_data,), "square"
        )

    # ------------------------------------------------------------------
    # Reductions and shape ops
    # ------------------------------------------------------------------

    def sum(
        self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
    ) -> Tensor:
        shape = self.shape
        out = np.asarray(self.data.sum(axis=axis, keepdims=keepdims))

        def backward(g: Array) -> tuple[Array]:
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor.from_op(out, (self,), backward, "sum")

    def mean(
        self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
    ) -> Tensor:
        if axis is None:
            count = self.data.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape: int) -> Tensor:
        original = self.shape
        out = self.data.reshape(shape)
        return Tensor.from_op(
            out, (self,), lambda g: (g.reshape(original),), "reshape"
        )

    def transpose(self, *axes: int) -> Tensor:
        inverse = tuple(int(i) for i in np.argsort(axes))
        out = np.ascontiguousarray(self.data.transpose(axes))
        return Tensor.from_op(
            out, (self,), lambda g: (g.transpose(inverse),), "transpose"
        )

    def __getitem__(self, index: Any) -> Tensor:
        shape, dtype = self.shape, self.dtype
        out = np.ascontiguousarray(self.data[index])

        def backward(g: Array) -> tuple[Array]:
            full = np.zeros(shape, dtype=dtype)
            full[index] = g
            return (full,)

        return Tensor.from_op(out, (self,), backward, "slice")

    # ------------------------------------------------------------------
    # Reverse mode
    # ------------------------------------------------------------------

    def _topological_order(self) -> list[Tensor]:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            stack.extend((p, False) for p in reversed(node._parents) if p.requires_grad)
        return order

    def backward(self) -> None:
        """Populate ``grad`` on every reachable tensor that requires it."""
        if self.data.size != 1:
            msg = f"backward needs a scalar loss, got shape {self.shape}"
            raise ArgumentError(msg)
        if not self.requires_grad:
            return
        self.grad = np.ones_like(self.data)
        for node in reversed(self._topological_order()):
            if node._backward is None or node.grad is None:
                continue
            parent_grads = node._backward(node.grad)
            for parent, pg in zip(node._parents, parent_grads, strict=True):
                if pg is None or not parent.requires_grad:
                    continue
                pg = pg.astype(parent.dtype, copy=False)
                if parent.grad is None:
                    parent.grad = pg.copy()
                else:
                    parent.grad = parent.grad + pg


def zeros(shape: Sequence[int], dtype: npt.DTypeLike = np.float32) -> Tensor:
    return Tensor(np.zeros(tuple(shape), dtype=dtype))


def parameter(data: Any, dtype: npt.DTypeLike = np.float32) -> Tensor:
    """Leaf tensor that takes part in training."""
    return Tensor(data, requires_grad=True, dtype=dtype)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along ``axis`` (used to rebatch single images)."""
    sizes = [t.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum(sizes)[:-1]

    def backward(g: Array) -> list[Array]:
        return list(np.split(g, splits, axis=axis))

    return Tensor.from_op(out, tensors, backward, "concat")
