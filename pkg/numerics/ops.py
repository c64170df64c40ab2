"""
Differentiable Primitives
==========================
Every exported function takes Tensors (or constants) and returns a Tensor.
When an input is tracked the call is recorded on its DiffGraph; otherwise it
runs eagerly. Each primitive is small enough to be grad-checked on its own.

Layouts:
  matrices      — (rows, cols)
  feature maps  — (height, width, channels), row-major
  conv kernels  — (kh, kw, cin, cout)

Numerics:
  float64 throughout; log arguments clamped below at LOG_CLAMP.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import sparse
from scipy.special import expit

from errors import InputError, ShapeError

from .tensor import ArrayLike, Context, Function, Tensor, as_tensor

LOG_CLAMP = 1e-12


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` back down to `shape` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ── Elementwise arithmetic ──────────────────────────────────────────────


class _Add(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        ctx.save_for_backward(a.shape, b.shape)
        return a + b

    @staticmethod
    def backward(ctx, grad):
        shape_a, shape_b = ctx.saved
        return _unbroadcast(grad, shape_a), _unbroadcast(grad, shape_b)


class _Sub(Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx.save_for_backward(a.shape, b.shape)
        return a - b

    @staticmethod
    def backward(ctx, grad):
        shape_a, shape_b = ctx.saved
        return _unbroadcast(grad, shape_a), _unbroadcast(-grad, shape_b)


class _Mul(Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx.save_for_backward(a, b)
        return a * b

    @staticmethod
    def backward(ctx, grad):
        a, b = ctx.saved
        return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)


class _Power(Function):
    @staticmethod
    def forward(ctx, x, exponent: float):
        ctx.save_for_backward(x, exponent)
        return np.power(x, exponent)

    @staticmethod
    def backward(ctx, grad):
        x, exponent = ctx.saved
        return (grad * exponent * np.power(x, exponent - 1.0),)


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    return _Add.apply(a, b)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    return _Sub.apply(a, b)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    return _Mul.apply(a, b)


def power(x: ArrayLike, exponent: float) -> Tensor:
    return _Power.apply(x, exponent=float(exponent))


# ── Shape plumbing ──────────────────────────────────────────────────────


class _Reshape(Function):
    @staticmethod
    def forward(ctx, x, shape: tuple[int, ...]):
        ctx.save_for_backward(x.shape)
        return x.reshape(shape)

    @staticmethod
    def backward(ctx, grad):
        (shape,) = ctx.saved
        return (grad.reshape(shape),)


class _Transpose(Function):
    @staticmethod
    def forward(ctx, x):
        return x.T

    @staticmethod
    def backward(ctx, grad):
        return (grad.T,)


class _Sum(Function):
    @staticmethod
    def forward(ctx, x, axis: Optional[int]):
        ctx.save_for_backward(x.shape, axis)
        return np.sum(x, axis=axis)

    @staticmethod
    def backward(ctx, grad):
        shape, axis = ctx.saved
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, shape).copy(),)


class _GatherRows(Function):
    @staticmethod
    def forward(ctx, x, index: np.ndarray):
        ctx.save_for_backward(x.shape, index)
        return x[index]

    @staticmethod
    def backward(ctx, grad):
        shape, index = ctx.saved
        out = np.zeros(shape, dtype=np.float64)
        np.add.at(out, index, grad)
        return (out,)


class _SegmentSum(Function):
    @staticmethod
    def forward(ctx, values, segments: np.ndarray, count: int):
        ctx.save_for_backward(segments)
        return np.bincount(segments, weights=values, minlength=count).astype(np.float64)

    @staticmethod
    def backward(ctx, grad):
        (segments,) = ctx.saved
        return (grad[segments],)


def reshape(x: ArrayLike, shape: Sequence[int]) -> Tensor:
    return _Reshape.apply(x, shape=tuple(int(s) for s in shape))


def transpose(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got dims {x.shape}")
    return _Transpose.apply(x)


def sum(x: ArrayLike, axis: Optional[int] = None) -> Tensor:  # noqa: A001
    return _Sum.apply(x, axis=axis)


def gather_rows(x: ArrayLike, index: np.ndarray) -> Tensor:
    """x[index] along the first axis; the gradient scatters back with summation."""
    return _GatherRows.apply(x, index=np.asarray(index, dtype=np.int64))


def segment_sum(values: ArrayLike, segments: np.ndarray, count: int) -> Tensor:
    """out[s] = Σ values[e] over entries with segments[e] == s, summed in entry order."""
    values = as_tensor(values)
    segments = np.asarray(segments, dtype=np.int64)
    if values.shape != segments.shape:
        raise ShapeError(f"segment_sum: values {values.shape} vs segments {segments.shape}")
    return _SegmentSum.apply(values, segments=segments, count=int(count))


# ── Linear algebra ──────────────────────────────────────────────────────


class _MatMul(Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx.save_for_backward(a, b)
        return a @ b

    @staticmethod
    def backward(ctx, grad):
        a, b = ctx.saved
        return grad @ b.T, a.T @ grad


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product of an m×n and an n×p matrix."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _MatMul.apply(a, b)


class _SpMM(Function):
    @staticmethod
    def forward(ctx, values, x, indptr: np.ndarray, indices: np.ndarray, rows: np.ndarray):
        n_rows = indptr.shape[0] - 1
        matrix = sparse.csr_matrix((values, indices, indptr), shape=(n_rows, x.shape[0]))
        ctx.save_for_backward(matrix, x, indices, rows)
        return matrix @ x

    @staticmethod
    def backward(ctx, grad):
        matrix, x, indices, rows = ctx.saved
        grad_values = np.sum(grad[rows] * x[indices], axis=1)
        grad_x = matrix.T @ grad
        return grad_values, np.asarray(grad_x)


def spmm(
    values: ArrayLike,
    x: ArrayLike,
    indptr: np.ndarray,
    indices: np.ndarray,
    rows: np.ndarray,
) -> Tensor:
    """CSR matrix (values over a fixed indptr/indices structure) times a dense matrix.

    `rows` is the expanded row index of every stored entry; it is only used to
    form the gradient w.r.t. `values`.
    """
    values, x = as_tensor(values), as_tensor(x)
    if values.shape != (indices.shape[0],):
        raise ShapeError(f"spmm: {values.shape[0] if values.ndim else 0} values for {indices.shape[0]} entries")
    if x.ndim != 2:
        raise ShapeError(f"spmm: dense operand must be a matrix, got dims {x.shape}")
    return _SpMM.apply(values, x, indptr=indptr, indices=indices, rows=rows)


# ── Activations ─────────────────────────────────────────────────────────


class _Sigmoid(Function):
    @staticmethod
    def forward(ctx, x):
        out = expit(x)
        ctx.save_for_backward(out)
        return out

    @staticmethod
    def backward(ctx, grad):
        (out,) = ctx.saved
        return (grad * out * (1.0 - out),)


class _Relu(Function):
    @staticmethod
    def forward(ctx, x):
        mask = x > 0
        ctx.save_for_backward(mask)
        return np.where(mask, x, 0.0)

    @staticmethod
    def backward(ctx, grad):
        (mask,) = ctx.saved
        return (np.where(mask, grad, 0.0),)


class _Softmax(Function):
    @staticmethod
    def forward(ctx, logits):
        shifted = logits - np.max(logits, axis=-1, keepdims=True)
        exp = np.exp(shifted)
        out = exp / np.sum(exp, axis=-1, keepdims=True)
        ctx.save_for_backward(out)
        return out

    @staticmethod
    def backward(ctx, grad):
        (out,) = ctx.saved
        return (out * (grad - np.sum(grad * out, axis=-1, keepdims=True)),)


def sigmoid(x: ArrayLike) -> Tensor:
    """Elementwise 1 / (1 + e^-x)."""
    return _Sigmoid.apply(x)


def relu(x: ArrayLike) -> Tensor:
    return _Relu.apply(x)


def softmax(logits: ArrayLike) -> Tensor:
    """Row-wise softmax over the last axis, with per-row max subtraction."""
    logits = as_tensor(logits)
    if logits.ndim != 2:
        raise ShapeError(f"softmax expects n×c logits, got dims {logits.shape}")
    return _Softmax.apply(logits)


# ── Loss ────────────────────────────────────────────────────────────────


class _CrossEntropy(Function):
    @staticmethod
    def forward(ctx, probs, labels: np.ndarray, weights: np.ndarray):
        rows = np.arange(probs.shape[0])
        picked = probs[rows, labels]
        clamped = np.maximum(picked, LOG_CLAMP)
        ctx.save_for_backward(probs.shape, labels, weights, picked)
        return -np.sum(weights * np.log(clamped))

    @staticmethod
    def backward(ctx, grad):
        shape, labels, weights, picked = ctx.saved
        out = np.zeros(shape, dtype=np.float64)
        live = picked >= LOG_CLAMP
        coeff = np.where(live, -weights / np.where(live, picked, 1.0), 0.0)
        out[np.arange(shape[0]), labels] = grad * coeff
        return (out,)


def cross_entropy(
    probs: ArrayLike,
    labels: Sequence[int] | np.ndarray,
    weights: Optional[Sequence[float] | np.ndarray] = None,
) -> Tensor:
    """-Σ_selected log(probs[i, label_i]); `weights` is a per-row 0/1 selector."""
    probs = as_tensor(probs)
    if probs.ndim != 2:
        raise ShapeError(f"cross_entropy expects n×c probabilities, got dims {probs.shape}")
    n, classes = probs.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n:
        raise ShapeError(f"cross_entropy: {labels.shape[0]} labels for {n} rows")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise InputError(f"cross_entropy: labels must lie in [0, {classes})")
    if weights is None:
        weights = np.ones(n, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if weights.shape[0] != n:
        raise ShapeError(f"cross_entropy: {weights.shape[0]} weights for {n} rows")
    return _CrossEntropy.apply(probs, labels=labels, weights=weights)


# ── Feature-map primitives ──────────────────────────────────────────────


def _pad_amounts(size: int, pad: str) -> tuple[int, int]:
    if pad == "valid":
        return 0, 0
    before = (size - 1) // 2
    return before, size - 1 - before


class _Conv2d(Function):
    @staticmethod
    def forward(ctx, x, kernel, stride: int, pad: str):
        kh, kw, cin, cout = kernel.shape
        top, bottom = _pad_amounts(kh, pad)
        left, right = _pad_amounts(kw, pad)
        padded = np.pad(x, ((top, bottom), (left, right), (0, 0)))
        windows = sliding_window_view(padded, (kh, kw), axis=(0, 1))[::stride, ::stride]
        out_h, out_w = windows.shape[:2]
        # (out_h, out_w, cin, kh, kw) -> im2col rows ordered as (kh, kw, cin)
        cols = windows.transpose(0, 1, 3, 4, 2).reshape(out_h * out_w, kh * kw * cin)
        weights = kernel.reshape(kh * kw * cin, cout)
        ctx.save_for_backward(cols, weights, kernel.shape, padded.shape, (top, left), stride, x.shape)
        return (cols @ weights).reshape(out_h, out_w, cout)

    @staticmethod
    def backward(ctx, grad):
        cols, weights, kshape, pshape, (top, left), stride, xshape = ctx.saved
        kh, kw, cin, cout = kshape
        out_h, out_w = grad.shape[:2]
        flat = grad.reshape(out_h * out_w, cout)
        grad_kernel = (cols.T @ flat).reshape(kshape)
        grad_cols = (flat @ weights.T).reshape(out_h, out_w, kh, kw, cin)
        grad_padded = np.zeros(pshape, dtype=np.float64)
        for i in range(kh):
            for j in range(kw):
                grad_padded[
                    i : i + stride * out_h : stride, j : j + stride * out_w : stride, :
                ] += grad_cols[:, :, i, j, :]
        grad_x = grad_padded[top : top + xshape[0], left : left + xshape[1], :]
        return grad_x, grad_kernel


def conv2d(x: ArrayLike, kernel: ArrayLike, stride: int = 1, pad: str = "same") -> Tensor:
    """Cross-correlation of an H×W×Cin map with a kh×kw×Cin×Cout kernel.

    "same" pads (k-1)//2 before and the rest after, so stride 1 keeps H×W.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 3 or kernel.ndim != 4:
        raise ShapeError(f"conv2d expects H×W×C input and 4-d kernel, got {x.shape} and {kernel.shape}")
    if kernel.shape[2] != x.shape[2]:
        raise ShapeError(
            f"conv2d: kernel expects {kernel.shape[2]} input channels, input has {x.shape[2]}"
        )
    if stride < 1:
        raise InputError(f"conv2d: stride must be positive, got {stride}")
    if pad not in ("same", "valid"):
        raise InputError(f"conv2d: pad must be 'same' or 'valid', got {pad!r}")
    return _Conv2d.apply(x, kernel, stride=int(stride), pad=pad)


class _Upsample2x(Function):
    @staticmethod
    def forward(ctx, x):
        return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)

    @staticmethod
    def backward(ctx, grad):
        h, w, c = grad.shape
        return (grad.reshape(h // 2, 2, w // 2, 2, c).sum(axis=(1, 3)),)


def upsample2x(x: ArrayLike) -> Tensor:
    """Nearest-neighbour 2× spatial upsampling of an H×W×C map."""
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"upsample2x expects H×W×C, got dims {x.shape}")
    return _Upsample2x.apply(x)


class _Concat(Function):
    @staticmethod
    def forward(ctx, *parts, axis: int):
        ctx.save_for_backward(np.cumsum([p.shape[axis] for p in parts])[:-1], axis)
        return np.concatenate(parts, axis=axis)

    @staticmethod
    def backward(ctx, grad):
        splits, axis = ctx.saved
        return tuple(np.split(grad, splits, axis=axis))


def concat_channels(parts: Sequence[ArrayLike]) -> Tensor:
    """Join H×W×Ci maps along channels, preserving order."""
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise InputError("concat_channels needs at least one part")
    spatial = parts[0].shape[:2]
    for p in parts:
        if p.ndim != 3 or p.shape[:2] != spatial:
            raise ShapeError(
                f"concat_channels: spatial dims differ ({[q.shape for q in parts]})"
            )
    if len(parts) == 1:
        return parts[0]
    return _Concat.apply(*parts, axis=-1)


def concat_rows(parts: Sequence[ArrayLike]) -> Tensor:
    """Stack matrices with equal column counts on top of each other."""
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise InputError("concat_rows needs at least one part")
    for p in parts:
        if p.ndim != 2 or p.shape[1] != parts[0].shape[1]:
            raise ShapeError(f"concat_rows: column counts differ ({[q.shape for q in parts]})")
    if len(parts) == 1:
        return parts[0]
    return _Concat.apply(*parts, axis=0)


class _SliceChannels(Function):
    @staticmethod
    def forward(ctx, x, start: int, stop: int):
        ctx.save_for_backward(x.shape, start, stop)
        return x[..., start:stop]

    @staticmethod
    def backward(ctx, grad):
        shape, start, stop = ctx.saved
        out = np.zeros(shape, dtype=np.float64)
        out[..., start:stop] = grad
        return (out,)


def slice_channels(x: ArrayLike, start: int, stop: int) -> Tensor:
    return _SliceChannels.apply(x, start=int(start), stop=int(stop))


# ── Gated blend ─────────────────────────────────────────────────────────


class _ConvexBlend(Function):
    @staticmethod
    def forward(ctx, z, x, h):
        ctx.save_for_backward(z, x, h)
        out = h + z * (x - h)
        # rounding can step one ulp past an endpoint
        return np.clip(out, np.minimum(x, h), np.maximum(x, h))

    @staticmethod
    def backward(ctx, grad):
        z, x, h = ctx.saved
        return grad * (x - h), grad * z, grad * (1.0 - z)


def convex_blend(z: ArrayLike, x: ArrayLike, h: ArrayLike) -> Tensor:
    """(1 - z) ⊙ h + z ⊙ x, kept inside [min(h, x), max(h, x)] componentwise."""
    z, x, h = as_tensor(z), as_tensor(x), as_tensor(h)
    if not (z.shape == x.shape == h.shape):
        raise ShapeError(f"convex_blend: gate {z.shape}, input {x.shape}, state {h.shape}")
    return _ConvexBlend.apply(z, x, h)
