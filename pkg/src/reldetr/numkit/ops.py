"""Differentiable operations on :class:`~reldetr.numkit.tensor.Tensor`.

Every op computes its forward value with numpy and attaches a backward rule
returning one gradient per input (``None`` for inputs that need none).
Broadcasting follows numpy semantics for the elementwise binary ops only.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from reldetr.errors import DimensionError, NumericError
from reldetr.numkit.tensor import ArrayLike, BackwardFn, Tensor, as_tensor

TensorLike = Tensor | ArrayLike


def _result(
    data: np.ndarray, parents: tuple[Tensor, ...], backward: BackwardFn, op: str
) -> Tensor:
    """Build an op output, keeping the backward rule only when needed."""
    requires_grad = any(parent.requires_grad for parent in parents)
    if not requires_grad:
        return Tensor(data, op=op)
    return Tensor(data, requires_grad=True, _parents=parents, _backward=backward, op=op)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(a.shape, b.shape))
    except ValueError as exc:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from exc


def add(a: TensorLike, b: TensorLike) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", ta, tb)

    def backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(grad, ta.shape), _unbroadcast(grad, tb.shape)

    return _result(ta.data + tb.data, (ta, tb), backward, "add")


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", ta, tb)

    def backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(grad, ta.shape), _unbroadcast(-grad, tb.shape)

    return _result(ta.data - tb.data, (ta, tb), backward, "sub")


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", ta, tb)

    def backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            _unbroadcast(grad * tb.data, ta.shape),
            _unbroadcast(grad * ta.data, tb.shape),
        )

    return _result(ta.data * tb.data, (ta, tb), backward, "mul")


def div(a: TensorLike, b: TensorLike) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", ta, tb)
    out = ta.data / tb.data

    def backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            _unbroadcast(grad / tb.data, ta.shape),
            _unbroadcast(-grad * out / tb.data, tb.shape),
        )

    return _result(out, (ta, tb), backward, "div")


def neg(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    return _result(-tx.data, (tx,), lambda grad: (-grad,), "neg")


def power(x: TensorLike, exponent: float) -> Tensor:
    """Raise to a constant power."""
    tx = as_tensor(x)

    def backward(grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * exponent * np.power(tx.data, exponent - 1),)

    return _result(np.power(tx.data, exponent), (tx,), backward, "power")


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    """Matrix product of two 2-D tensors."""
    ta, tb = as_tensor(a), as_tensor(b)
    if ta.ndim != 2 or tb.ndim != 2 or ta.shape[1] != tb.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {ta.shape} and {tb.shape}")

    def backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return grad @ tb.data.T, ta.data.T @ grad

    return _result(ta.data @ tb.data, (ta, tb), backward, "matmul")


def transpose(x: TensorLike) -> Tensor:
    """Swap the two axes of a 2-D tensor."""
    tx = as_tensor(x)
    if tx.ndim != 2:
        raise DimensionError(f"transpose: expected a 2-D tensor, got shape {tx.shape}")
    return _result(tx.data.T, (tx,), lambda grad: (grad.T,), "transpose")


def reshape(x: TensorLike, shape: Sequence[int]) -> Tensor:
    tx = as_tensor(x)
    try:
        out = tx.data.reshape(tuple(shape))
    except ValueError as exc:
        raise DimensionError(f"reshape: cannot view {tx.shape} as {tuple(shape)}") from exc
    return _result(out, (tx,), lambda grad: (grad.reshape(tx.shape),), "reshape")


def take(x: TensorLike, indices: Sequence[int] | np.ndarray, axis: int = 0) -> Tensor:
    """Gather entries along ``axis`` (indices may repeat)."""
    tx = as_tensor(x)
    index = np.asarray(indices, dtype=np.int64)

    def backward(grad: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros_like(tx.data)
        moved = np.moveaxis(full, axis, 0)
        np.add.at(moved, index, np.moveaxis(grad, axis, 0))
        return (full,)

    return _result(np.take(tx.data, index, axis=axis), (tx,), backward, "take")


def concat(tensors: Sequence[TensorLike], axis: int = -1) -> Tensor:
    parts = tuple(as_tensor(item) for item in tensors)
    if not parts:
        raise DimensionError("concat: needs at least one tensor")
    try:
        out = np.concatenate([part.data for part in parts], axis=axis)
    except ValueError as exc:
        shapes = ", ".join(str(part.shape) for part in parts)
        raise DimensionError(f"concat: incompatible shapes {shapes}") from exc
    bounds = np.cumsum([part.shape[axis] for part in parts])[:-1]

    def backward(grad: np.ndarray) -> list[np.ndarray]:
        return list(np.split(grad, bounds, axis=axis))

    return _result(out, parts, backward, "concat")


def sum(x: TensorLike, axis: int | None = None, keepdims: bool = False) -> Tensor:
    tx = as_tensor(x)

    def backward(grad: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, tx.shape).copy(),)

    return _result(np.sum(tx.data, axis=axis, keepdims=keepdims), (tx,), backward, "sum")


def mean(x: TensorLike, axis: int | None = None, keepdims: bool = False) -> Tensor:
    tx = as_tensor(x)
    count = tx.size if axis is None else tx.shape[axis]
    return div(sum(tx, axis=axis, keepdims=keepdims), float(count))


def exp(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    out = np.exp(tx.data)
    return _result(out, (tx,), lambda grad: (grad * out,), "exp")


def log(x: TensorLike) -> Tensor:
    """Natural logarithm; non-positive inputs fail fast."""
    tx = as_tensor(x)
    if np.any(tx.data <= 0):
        raise NumericError("log of a non-positive value", location="log")
    return _result(np.log(tx.data), (tx,), lambda grad: (grad / tx.data,), "log")


def sin(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    return _result(np.sin(tx.data), (tx,), lambda grad: (grad * np.cos(tx.data),), "sin")


def cos(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    return _result(np.cos(tx.data), (tx,), lambda grad: (-grad * np.sin(tx.data),), "cos")


def abs(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    return _result(np.abs(tx.data), (tx,), lambda grad: (grad * np.sign(tx.data),), "abs")


def sigmoid(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    out = stable_sigmoid(tx.data)
    return _result(out, (tx,), lambda grad: (grad * out * (1.0 - out),), "sigmoid")


def softplus(x: TensorLike) -> Tensor:
    """``log(1 + exp(x))`` computed without overflow."""
    tx = as_tensor(x)
    out = np.logaddexp(0.0, tx.data)
    return _result(out, (tx,), lambda grad: (grad * stable_sigmoid(tx.data),), "softplus")


def relu(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    mask = tx.data > 0
    return _result(np.where(mask, tx.data, 0.0), (tx,), lambda grad: (grad * mask,), "relu")


def clamp_min(x: TensorLike, floor: float) -> Tensor:
    """Elementwise ``max(floor, x)``; gradient flows only where ``x > floor``."""
    tx = as_tensor(x)
    mask = tx.data > floor
    out = np.where(mask, tx.data, floor)
    return _result(out, (tx,), lambda grad: (grad * mask,), "clamp_min")


def maximum(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise maximum of two tensors; ties route the gradient to ``a``."""
    ta, tb = as_tensor(a), as_tensor(b)
    _broadcast_shape("maximum", ta, tb)
    pick_a = ta.data >= tb.data

    def backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            _unbroadcast(grad * pick_a, ta.shape),
            _unbroadcast(grad * ~pick_a, tb.shape),
        )

    return _result(np.where(pick_a, ta.data, tb.data), (ta, tb), backward, "maximum")


def minimum(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise minimum of two tensors; ties route the gradient to ``a``."""
    ta, tb = as_tensor(a), as_tensor(b)
    _broadcast_shape("minimum", ta, tb)
    pick_a = ta.data <= tb.data

    def backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            _unbroadcast(grad * pick_a, ta.shape),
            _unbroadcast(grad * ~pick_a, tb.shape),
        )

    return _result(np.where(pick_a, ta.data, tb.data), (ta, tb), backward, "minimum")


def softmax_rows(x: TensorLike, bias: TensorLike | None = None) -> Tensor:
    """Softmax over the last axis of ``x + bias``.

    Scores and bias are shifted by their own row maxima before they are
    added, so a bias that is constant along each row leaves the output
    bitwise identical to the unbiased call.
    """
    tx = as_tensor(x)
    if np.isnan(tx.data).any():
        raise NumericError("NaN input", location="softmax_rows")
    shifted = tx.data - np.max(tx.data, axis=-1, keepdims=True)
    parents: tuple[Tensor, ...] = (tx,)
    if bias is not None:
        tb = as_tensor(bias)
        if tb.shape != tx.shape:
            raise DimensionError(f"softmax_rows: bias {tb.shape} does not match {tx.shape}")
        if np.isnan(tb.data).any():
            raise NumericError("NaN bias", location="softmax_rows")
        shifted = shifted + (tb.data - np.max(tb.data, axis=-1, keepdims=True))
        parents = (tx, tb)
    shifted = shifted - np.max(shifted, axis=-1, keepdims=True)
    weights = np.exp(shifted)
    out = weights / np.sum(weights, axis=-1, keepdims=True)

    def backward(grad: np.ndarray) -> tuple[np.ndarray, ...]:
        inner = np.sum(grad * out, axis=-1, keepdims=True)
        local = out * (grad - inner)
        return (local,) * len(parents)

    return _result(out, parents, backward, "softmax_rows")


def linear(x: TensorLike, weight: TensorLike, bias: TensorLike | None = None) -> Tensor:
    """Affine map ``x @ weight.T + bias`` with ``weight`` shaped (out, in)."""
    tx, tw = as_tensor(x), as_tensor(weight)
    if tw.ndim != 2 or tx.shape[-1] != tw.shape[1]:
        raise DimensionError(f"linear: input {tx.shape} does not fit weight {tw.shape}")
    flat = reshape(tx, (-1, tx.shape[-1])) if tx.ndim != 2 else tx
    out = matmul(flat, transpose(tw))
    if bias is not None:
        out = add(out, bias)
    if tx.ndim != 2:
        out = reshape(out, (*tx.shape[:-1], tw.shape[0]))
    return out


def stable_sigmoid(values: np.ndarray) -> np.ndarray:
    """Plain-array logistic function without overflow warnings."""
    out = np.empty_like(values, dtype=np.float64)
    positive = values >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-values[positive]))
    exp_values = np.exp(values[~positive])
    out[~positive] = exp_values / (1.0 + exp_values)
    return out


def check_finite(x: Tensor, location: str) -> Tensor:
    """Raise :class:`NumericError` when ``x`` holds NaN or infinity."""
    if not np.all(np.isfinite(x.data)):
        raise NumericError("non-finite activation", location=location)
    return x
