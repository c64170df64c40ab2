"""Pixel-wise supervised loss, the total loss, and mask resampling helpers."""

from __future__ import annotations

import numpy as np

from errors import ConfigError, InputError, ShapeError
from numerics import ops
from numerics.tensor import ArrayLike, Tensor, as_tensor


def loss_sup(pred: ArrayLike, gt: np.ndarray) -> Tensor:
    """Cross-entropy summed over every pixel of an H×W×2 probability map."""
    pred = as_tensor(pred)
    gt = np.asarray(gt)
    if pred.ndim != 3 or pred.shape[:2] != gt.shape:
        raise ShapeError(f"loss_sup: prediction {pred.shape} vs mask {gt.shape}")
    height, width, classes = pred.shape
    return ops.cross_entropy(
        ops.reshape(pred, (height * width, classes)), (gt.reshape(-1) > 0).astype(np.int64)
    )


def total_loss(l_sem: ArrayLike, l_sup: ArrayLike, lam: float) -> Tensor:
    """l_sem + λ·l_sup."""
    if lam <= 0:
        raise ConfigError(f"loss trade-off λ must be positive, got {lam}")
    return ops.add(l_sem, ops.mul(l_sup, float(lam)))


def predicted_mask(probs: ArrayLike) -> np.ndarray:
    """Per-pixel argmax of an H×W×2 map; ties go to background."""
    data = as_tensor(probs).data
    return (data[..., 1] > data[..., 0]).astype(np.uint8)


def downsample_mask(mask: np.ndarray, factor: int = 4) -> np.ndarray:
    """Block-majority reduction: a block is set when at least half its pixels are."""
    mask = np.asarray(mask)
    height, width = mask.shape
    if height % factor or width % factor:
        raise InputError(f"mask {height}×{width} is not divisible by {factor}")
    blocks = (mask > 0).reshape(height // factor, factor, width // factor, factor)
    return (2 * blocks.sum(axis=(1, 3)) >= factor * factor).astype(np.uint8)
