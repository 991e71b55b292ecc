"""
Tensor with tape-based reverse-mode differentiation.

Every differentiable operation that touches a tensor with ``requires_grad``
appends a :class:`TapeNode` to the tape of the current thread. ``backward()``
sweeps that tape in reverse recording order, which is already a topological
order, accumulates gradients with ``+=`` and clears the tape.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
import threading
from typing import Any, Callable, Iterator, Sequence

import numpy as np
from scipy.special import expit

from ..exceptions import AutogradError, ShapeError

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


@dataclass(eq=False)
class TapeNode:
    op: str
    output: "Tensor"
    inputs: tuple["Tensor", ...]
    backward: BackwardFn


@dataclass
class Tape:
    nodes: list[TapeNode] = field(default_factory=list)

    def record(self, node: TapeNode) -> None:
        self.nodes.append(node)

    def clear(self) -> None:
        for node in self.nodes:
            node.output.tape_node = None
        self.nodes.clear()

    def __len__(self) -> int:
        return len(self.nodes)


class _TapeState(threading.local):
    def __init__(self) -> None:
        self.tape = Tape()
        self.grad_enabled = True


_state = _TapeState()


def active_tape() -> Tape:
    """Return the tape confined to the calling thread."""
    return _state.tape


def reset_tape() -> None:
    """Drop every recorded node without computing gradients."""
    _state.tape.clear()


def is_grad_enabled() -> bool:
    return _state.grad_enabled


@contextmanager
def no_grad() -> Iterator[None]:
    """Run the enclosed block without recording onto the tape."""
    previous = _state.grad_enabled
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` following right-aligned broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def broadcast_shape(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(a, b))
    except ValueError as e:
        raise ShapeError(f"Shapes {a} and {b} are not broadcastable") from e


class Tensor:
    """n-dimensional real array with optional gradient accumulation."""

    __slots__ = ("data", "requires_grad", "grad", "tape_node", "name")
    __array_priority__ = 100.0

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        dtype: Any = None,
        name: str | None = None,
    ) -> None:
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.tape_node: TapeNode | None = None
        self.name = name

    # ------------------------------------------------------------------ basics
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() requires a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return self.shape[0]

    # --------------------------------------------------------------- autograd
    def backward(self) -> None:
        backward(self)

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    # -------------------------------------------------------------- operators
    def __add__(self, other: Any) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: Any) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: Any) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)

    def __matmul__(self, other: Any) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        return getitem(self, index)

    # ---------------------------------------------------------------- methods
    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis, keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> "Tensor":
        return tmean(self, axis, keepdims)

    def reshape(self, *shape: Any) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def exp(self) -> "Tensor":
        return exp(self)

    def log(self) -> "Tensor":
        return log(self)

    def sqrt(self) -> "Tensor":
        return sqrt(self)

    def abs(self) -> "Tensor":
        return tabs(self)

    def sin(self) -> "Tensor":
        return sin(self)

    def cos(self) -> "Tensor":
        return cos(self)

    def sigmoid(self) -> "Tensor":
        return sigmoid(self)


# ---------------------------------------------------------------------------
# graph construction
# ---------------------------------------------------------------------------
def as_tensor(value: Any, like: Tensor | None = None) -> Tensor:
    """Wrap scalars/arrays as constant tensors in the dtype of ``like``."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def make_result(
    op: str,
    data: np.ndarray,
    inputs: Sequence[Tensor],
    backward_fn: BackwardFn,
) -> Tensor:
    """Create an op output and record it when any input tracks gradients."""
    requires = is_grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires, dtype=data.dtype)
    if requires:
        node = TapeNode(op, out, tuple(inputs), backward_fn)
        _state.tape.record(node)
        out.tape_node = node
    return out


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` of every requires_grad tensor reachable from ``loss``."""
    if loss.size != 1:
        raise AutogradError(f"backward() requires a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise AutogradError("backward() called on a tensor that is not on the tape")

    tape = _state.tape
    loss._accumulate(np.ones_like(loss.data))
    try:
        for node in reversed(tape.nodes):
            grad_out = node.output.grad
            if grad_out is None:
                continue
            input_grads = node.backward(grad_out)
            for inp, g in zip(node.inputs, input_grads):
                if g is None or not inp.requires_grad:
                    continue
                inp._accumulate(unbroadcast(np.asarray(g), inp.shape))
    finally:
        tape.clear()


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------
def _binary_operands(a: Any, b: Any) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b_t = as_tensor(b)
    return as_tensor(a, like=b_t), b_t


def add(a: Any, b: Any) -> Tensor:
    a, b = _binary_operands(a, b)
    broadcast_shape(a.shape, b.shape)
    return make_result("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Any, b: Any) -> Tensor:
    a, b = _binary_operands(a, b)
    broadcast_shape(a.shape, b.shape)
    return make_result("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Any, b: Any) -> Tensor:
    a, b = _binary_operands(a, b)
    broadcast_shape(a.shape, b.shape)
    return make_result(
        "mul", a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data)
    )


def div(a: Any, b: Any) -> Tensor:
    a, b = _binary_operands(a, b)
    broadcast_shape(a.shape, b.shape)
    out = a.data / b.data
    return make_result(
        "div", out, (a, b), lambda g: (g / b.data, -g * out / b.data)
    )


def neg(a: Tensor) -> Tensor:
    return make_result("neg", -a.data, (a,), lambda g: (-g,))


def power(a: Tensor, exponent: float) -> Tensor:
    """``a ** exponent`` for a constant scalar exponent."""
    p = float(exponent)
    out = np.power(a.data, p)

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        with np.errstate(divide="ignore", invalid="ignore"):
            local = p * np.power(a.data, p - 1.0)
        if p >= 1.0:
            local = np.where(a.data == 0, 0.0 if p > 1.0 else 1.0, local)
        return (g * local,)

    return make_result("pow", out, (a,), _backward)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return make_result("exp", out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return make_result("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return make_result("sqrt", out, (a,), lambda g: (g * 0.5 / out,))


def tabs(a: Tensor) -> Tensor:
    return make_result("abs", np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def sin(a: Tensor) -> Tensor:
    return make_result("sin", np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))


def cos(a: Tensor) -> Tensor:
    return make_result("cos", np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),))


def sigmoid(a: Tensor) -> Tensor:
    out = expit(a.data).astype(a.dtype, copy=False)
    return make_result("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def atan2(y: Tensor, x: Tensor) -> Tensor:
    """Two-argument arctangent in (-pi, pi]; (0, 0) maps to 0 with zero gradient."""
    y, x = _binary_operands(y, x)
    out = np.arctan2(y.data, x.data)
    # atan2(-0.0, x<0) returns -pi; fold it onto +pi
    out = np.where(out <= -np.pi, np.pi, out)

    def _backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        denom = x.data * x.data + y.data * y.data
        safe = np.where(denom > 0, denom, 1.0)
        gy = np.where(denom > 0, g * x.data / safe, 0.0)
        gx = np.where(denom > 0, -g * y.data / safe, 0.0)
        return gy, gx

    return make_result("atan2", out, (y, x), _backward)


def where(condition: np.ndarray, a: Any, b: Any) -> Tensor:
    """Select from ``a`` where ``condition`` holds, else from ``b`` (condition is constant)."""
    a, b = _binary_operands(a, b)
    cond = np.asarray(condition, dtype=bool)
    out = np.where(cond, a.data, b.data)
    return make_result(
        "where", out, (a, b), lambda g: (np.where(cond, g, 0.0), np.where(cond, 0.0, g))
    )


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------
def matmul(a: Any, b: Any) -> Tensor:
    """Batched matrix product over the two trailing axes."""
    a, b = _binary_operands(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul requires operands with at least two axes")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(
            f"matmul inner dimensions differ: {a.shape} @ {b.shape}"
        )
    broadcast_shape(a.shape[:-2], b.shape[:-2])
    out = np.matmul(a.data, b.data)

    def _backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return ga, gb

    return make_result("matmul", out, (a, b), _backward)


# ---------------------------------------------------------------------------
# reductions and shape manipulation
# ---------------------------------------------------------------------------
def _normalize_axes(axis: int | tuple[int, ...] | None, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    normalized = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise ShapeError(f"Axis {ax} is out of range for a {ndim}-d tensor")
        normalized.append(ax % ndim)
    return tuple(sorted(normalized))


def tsum(a: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    out = np.sum(a.data, axis=axes, keepdims=keepdims)

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape),)

    return make_result("sum", np.asarray(out), (a,), _backward)


def tmean(a: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return tsum(a, axes, keepdims) * (1.0 / count)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError as e:
        raise ShapeError(f"Cannot reshape {a.shape} into {tuple(shape)}") from e
    return make_result("reshape", out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    perm = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
    if sorted(perm) != list(range(a.ndim)):
        raise ShapeError(f"Invalid permutation {perm} for a {a.ndim}-d tensor")
    inverse = tuple(np.argsort(perm))
    return make_result(
        "transpose", np.transpose(a.data, perm), (a,), lambda g: (np.transpose(g, inverse),)
    )


def getitem(a: Tensor, index: Any) -> Tensor:
    out = a.data[index]

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return make_result("getitem", np.array(out, copy=True), (a,), _backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat requires at least one tensor")
    ndim = tensors[0].ndim
    (ax,) = _normalize_axes(axis, ndim)
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != ax
        ):
            raise ShapeError(
                f"concat along axis {ax}: incompatible shapes {tensors[0].shape} and {t.shape}"
            )
    out = np.concatenate([t.data for t in tensors], axis=ax)
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def _backward(g: np.ndarray) -> list[np.ndarray]:
        return np.split(g, bounds, axis=ax)

    return make_result("concat", out, tuple(tensors), _backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    expanded = []
    for t in tensors:
        shape = list(t.shape)
        pos = axis if axis >= 0 else t.ndim + 1 + axis
        shape.insert(pos, 1)
        expanded.append(reshape(t, shape))
    return concat(expanded, axis=axis)
