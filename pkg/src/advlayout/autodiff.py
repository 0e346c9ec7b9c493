"""
Reverse-mode automatic differentiation over dense 2-D arrays.

A Tape records operations in append order; ``Tape.backward`` walks them in
strict reverse order. Tensors created with ``Tape.constant`` (or produced
only from constants) are not recorded and receive no gradient.

Example:
    tape = Tape()
    w = tape.variable(np.ones((3, 1)))
    x = tape.constant(np.arange(6.0).reshape(2, 3))
    loss = ad.sum(ad.sigmoid(ad.matmul(x, w)))
    grads = tape.backward(loss)
    grads[w]
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, NonScalarLoss, ShapeMismatch

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """A 2-D array, optionally recorded on a tape (``node`` is None for constants)."""

    __slots__ = ('value', 'tape', 'node')

    def __init__(self, value: np.ndarray, tape: Optional["Tape"] = None, node: Optional[int] = None):
        value = np.asarray(value, dtype=float)
        if value.ndim == 0:
            value = value.reshape(1, 1)
        elif value.ndim == 1:
            value = value.reshape(1, -1)
        elif value.ndim != 2:
            raise ShapeMismatch(f"tensors are 2-D, got shape {value.shape}")
        self.value = value
        self.tape = tape
        self.node = node

    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape  # type: ignore[return-value]

    @property
    def tracked(self) -> bool:
        return self.node is not None

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeMismatch(f"item() needs a 1×1 tensor, got {self.shape}")
        return float(self.value[0, 0])

    def __repr__(self) -> str:
        kind = f"node={self.node}" if self.tracked else "const"
        return f"Tensor(shape={self.shape}, {kind})"

    def __add__(self, other: "Operand") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Operand") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Operand") -> "Tensor":
        if isinstance(other, (int, float)):
            return scalar_mul(self, float(other))
        return elementwise_mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __neg__(self) -> "Tensor":
        return scalar_mul(self, -1.0)


Operand = Union[Tensor, np.ndarray, float]


@dataclass
class _Node:
    op: str
    inputs: Tuple[Optional[int], ...]
    backward: BackwardFn


class Gradients:
    """Gradients of one backward pass, indexed by tensor."""

    def __init__(self, grads: List[Optional[np.ndarray]], shapes: List[Tuple[int, int]]):
        self._grads = grads
        self._shapes = shapes

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        if tensor.node is None:
            return np.zeros_like(tensor.value)
        grad = self._grads[tensor.node]
        return np.zeros(self._shapes[tensor.node]) if grad is None else grad


class Tape:
    """Append-only record of operations."""

    def __init__(self) -> None:
        self.nodes: List[_Node] = []
        self._shapes: List[Tuple[int, int]] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def variable(self, value: np.ndarray) -> Tensor:
        """Leaf that receives a gradient."""
        tensor = Tensor(np.array(value, dtype=float), self)
        tensor.node = self._append("leaf", (), lambda g: (), tensor.shape)
        return tensor

    def constant(self, value: np.ndarray) -> Tensor:
        return Tensor(np.array(value, dtype=float), self)

    def _append(self, op: str, inputs: Tuple[Optional[int], ...], backward: BackwardFn,
                shape: Tuple[int, int]) -> int:
        self.nodes.append(_Node(op, inputs, backward))
        self._shapes.append(shape)
        return len(self.nodes) - 1

    def backward(self, loss: Tensor) -> Gradients:
        """Reverse traversal from a 1×1 loss; unreachable nodes get zero gradient."""
        if loss.shape != (1, 1):
            raise NonScalarLoss(f"loss must be 1×1, got {loss.shape}")
        grads: List[Optional[np.ndarray]] = [None] * len(self.nodes)
        if loss.node is None:
            return Gradients(grads, self._shapes)
        grads[loss.node] = np.ones((1, 1))
        for index in range(loss.node, -1, -1):
            grad = grads[index]
            if grad is None:
                continue
            node = self.nodes[index]
            if not node.inputs:
                continue
            for parent, contribution in zip(node.inputs, node.backward(grad)):
                if parent is None or contribution is None:
                    continue
                if grads[parent] is None:
                    grads[parent] = np.array(contribution, dtype=float)
                else:
                    grads[parent] = grads[parent] + contribution
        return Gradients(grads, self._shapes)


def _as_tensor(x: Operand, tape: Optional[Tape]) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=float), tape)


def _tape_of(*tensors: Tensor) -> Optional[Tape]:
    tape = None
    for t in tensors:
        if not t.tracked:
            continue
        if tape is None:
            tape = t.tape
        elif t.tape is not tape:
            raise ShapeMismatch("tensors belong to different tapes")
    if tape is None:
        tape = next((t.tape for t in tensors if t.tape is not None), None)
    return tape


def _record(op: str, value: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    tape = _tape_of(*inputs)
    out = Tensor(value, tape)
    if tape is not None and any(t.tracked for t in inputs):
        out.node = tape._append(op, tuple(t.node for t in inputs), backward, out.shape)
    return out


def _broadcast_shape(op: str, a: Tuple[int, int], b: Tuple[int, int]) -> Tuple[int, int]:
    shape = []
    for da, db in zip(a, b):
        if da != db and da != 1 and db != 1:
            raise ShapeMismatch(f"{op}: shapes {a} and {b} do not broadcast")
        shape.append(max(da, db))
    return shape[0], shape[1]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    for axis in (0, 1):
        if shape[axis] == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Operand, b: Operand) -> Tensor:
    a, b = _as_tensor(a, None), _as_tensor(b, None)
    _broadcast_shape("add", a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return _record("add", a.value + b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _as_tensor(a, None), _as_tensor(b, None)
    _broadcast_shape("sub", a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return _record("sub", a.value - b.value, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def scalar_mul(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _record("scalar_mul", a.value * c, (a,), lambda g: (g * c,))


def elementwise_mul(a: Operand, b: Operand) -> Tensor:
    a, b = _as_tensor(a, None), _as_tensor(b, None)
    _broadcast_shape("elementwise_mul", a.shape, b.shape)
    av, bv = a.value, b.value
    return _record("elementwise_mul", av * bv, (a, b),
                   lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def matmul(a: Operand, b: Operand) -> Tensor:
    a, b = _as_tensor(a, None), _as_tensor(b, None)
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _record("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def row_concat(*tensors: Tensor) -> Tensor:
    """Stack tensors vertically (same column count)."""
    cols = {t.shape[1] for t in tensors}
    if len(cols) != 1:
        raise ShapeMismatch(f"row_concat: column counts differ {sorted(cols)}")
    splits = np.cumsum([t.shape[0] for t in tensors])[:-1]
    return _record("row_concat", np.vstack([t.value for t in tensors]), tensors,
                   lambda g: tuple(np.split(g, splits, axis=0)))


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    """max(x, slope·x); the derivative at exactly 0 is 1."""
    if not 0.0 < slope < 1.0:
        raise DomainError(f"leaky_relu slope must be in (0, 1), got {slope}")
    mask = np.where(a.value >= 0.0, 1.0, slope)
    return _record("leaky_relu", a.value * mask, (a,), lambda g: (g * mask,))


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    ex = np.exp(x[~positive])
    out[~positive] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _stable_sigmoid(a.value)
    return _record("sigmoid", s, (a,), lambda g: (g * s * (1.0 - s),))


def softplus(a: Tensor) -> Tensor:
    """log(1 + e^x), evaluated without overflow."""
    s = _stable_sigmoid(a.value)
    return _record("softplus", np.logaddexp(0.0, a.value), (a,), lambda g: (g * s,))


def log(a: Tensor) -> Tensor:
    if np.any(a.value <= 0.0):
        raise DomainError("log of a non-positive value")
    av = a.value
    return _record("log", np.log(av), (a,), lambda g: (g / av,))


def pow_scalar(a: Tensor, p: float) -> Tensor:
    p = float(p)
    av = a.value
    if p != int(p) and np.any(av < 0.0):
        raise DomainError(f"non-integer power {p} of a negative value")
    if p < 0 and np.any(av == 0.0):
        raise DomainError(f"negative power {p} of zero")
    return _record("pow_scalar", av ** p, (a,), lambda g: (g * p * av ** (p - 1.0),))


def mean_rows(a: Tensor) -> Tensor:
    """Column means, (N, C) -> (1, C)."""
    n = a.shape[0]
    return _record("mean_rows", a.value.mean(axis=0, keepdims=True), (a,),
                   lambda g: (np.repeat(g / n, n, axis=0),))


def sum(a: Tensor) -> Tensor:  # noqa: A001 - mirrors the op name
    shape = a.shape
    return _record("sum", np.array([[a.value.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),))


def scatter_mean(a: Tensor, index: np.ndarray, size: int) -> Tensor:
    """Row e of ``a`` is averaged into output row index[e]; empty rows are 0."""
    index = np.asarray(index, dtype=np.int64)
    if index.shape != (a.shape[0],):
        raise ShapeMismatch(f"scatter_mean: {index.shape[0]} indices for {a.shape[0]} rows")
    counts = np.bincount(index, minlength=size).astype(float)
    totals = np.zeros((size, a.shape[1]))
    np.add.at(totals, index, a.value)
    safe = np.maximum(counts, 1.0)[:, None]
    return _record("scatter_mean", totals / safe, (a,), lambda g: ((g / safe)[index],))


def gather_rows(a: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.int64)
    shape = a.shape

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        out = np.zeros(shape)
        np.add.at(out, index, g)
        return (out,)

    return _record("gather_rows", a.value[index], (a,), backward)


def l2_norm_rows(a: Tensor) -> Tensor:
    """Euclidean norm of each row, (N, C) -> (N, 1); gradient 0 at the origin."""
    av = a.value
    norms = np.sqrt(np.sum(av * av, axis=1, keepdims=True))
    unit = np.divide(av, norms, out=np.zeros_like(av), where=norms > 0)
    return _record("l2_norm_rows", norms, (a,), lambda g: (g * unit,))


def grad_check(
    f: Callable[[Tape, Tensor], Tensor],
    x: np.ndarray,
    eps: float = 1e-5,
) -> float:
    """
    Max relative error between the tape gradient of a scalar function and
    central differences, |a − n| / max(|a|, |n|, 1e-8).

    Inputs at nondifferentiable points (kinks) will report large errors; callers
    exclude them from pass/fail.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    x = np.array(x, dtype=float)
    tape = Tape()
    xt = tape.variable(x)
    analytic = tape.backward(f(tape, xt))[xt]

    worst = 0.0
    for idx in np.ndindex(*x.shape):
        plus, minus = x.copy(), x.copy()
        plus[idx] += eps
        minus[idx] -= eps
        f_plus = f(Tape(), Tensor(plus)).item()
        f_minus = f(Tape(), Tensor(minus)).item()
        numeric = (f_plus - f_minus) / (2 * eps)
        a = float(analytic[idx])
        error = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, error)
    return worst
