"""Dense float64 tensors, tape-based reverse-mode differentiation, Adam."""

from .gradcheck import grad_check
from .ops import (
    LOG_CLAMP,
    add,
    concat_channels,
    concat_rows,
    conv2d,
    convex_blend,
    cross_entropy,
    gather_rows,
    matmul,
    mul,
    power,
    relu,
    reshape,
    segment_sum,
    sigmoid,
    slice_channels,
    softmax,
    spmm,
    sub,
    transpose,
    upsample2x,
)
from .ops import sum as sum_  # noqa: F401
from .optim import AdamState, adam_step, lr_at_epoch
from .tensor import DiffGraph, Function, Tensor, as_tensor, backward

__all__ = [
    "AdamState",
    "DiffGraph",
    "Function",
    "LOG_CLAMP",
    "Tensor",
    "adam_step",
    "add",
    "as_tensor",
    "backward",
    "concat_channels",
    "concat_rows",
    "conv2d",
    "convex_blend",
    "cross_entropy",
    "gather_rows",
    "grad_check",
    "lr_at_epoch",
    "matmul",
    "mul",
    "power",
    "relu",
    "reshape",
    "segment_sum",
    "sigmoid",
    "slice_channels",
    "softmax",
    "spmm",
    "sub",
    "sum_",
    "transpose",
    "upsample2x",
]
