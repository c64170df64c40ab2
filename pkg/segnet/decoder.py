"""
Attention, Fusion and Skip-Connected Decoder
=============================================
  att     = Σ_c X_t(r, c, ·)·h            per-location inner product, h×w×1
  fused   = conv1×1(att ⊕ X^gcf ⊕ M_1 ⊕ X_1)      → d channels
  up1     = relu(conv3×3(up2x(fused) ⊕ skip2))   → u1 channels (32 by default)
  up2     = relu(conv3×3(up2x(up1)   ⊕ skip1))   → u2 channels (16 by default)
  probs   = softmax(conv1×1(up2))                → H×W×2
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from errors import ShapeError
from numerics import ops
from numerics.tensor import ArrayLike, Tensor, as_tensor

from .encoder import Skips

UP1_CHANNELS = 32
UP2_CHANNELS = 16


@dataclass
class DecoderParams:
    fuse: Tensor  # 1×1×(2d+2)×d
    up1: Tensor   # 3×3×(d+e2)×u1
    up2: Tensor   # 3×3×(u1+e1)×u2
    out: Tensor   # 1×1×u2×2


def attention(Xt: ArrayLike, h: ArrayLike) -> Tensor:
    """Target-specific attention map (h×w×1) from query features and the memory state."""
    Xt, h = as_tensor(Xt), as_tensor(h)
    if Xt.ndim != 3 or h.shape != (Xt.shape[2],):
        raise ShapeError(f"attention: features {Xt.shape} vs state {h.shape}")
    rows, cols, d = Xt.shape
    scores = ops.matmul(ops.reshape(Xt, (rows * cols, d)), ops.reshape(h, (d, 1)))
    return ops.reshape(scores, (rows, cols, 1))


def fuse(
    Xgcf: ArrayLike, att: ArrayLike, X1: ArrayLike, M1: np.ndarray, kernel: ArrayLike
) -> Tensor:
    """Concatenate att ⊕ X^gcf ⊕ M1 ⊕ X1 (feature resolution) and mix with a 1×1 conv."""
    M1 = np.asarray(M1, dtype=np.float64)
    if M1.ndim == 2:
        M1 = M1[:, :, None]
    stacked = ops.concat_channels([att, Xgcf, M1, X1])
    return ops.conv2d(stacked, kernel, stride=1)


def decode(fused: ArrayLike, skips: Skips, params: DecoderParams) -> Tensor:
    fused = as_tensor(fused)
    rows, cols = fused.shape[:2]
    if skips.stage2.shape[:2] != (2 * rows, 2 * cols) or skips.stage1.shape[:2] != (4 * rows, 4 * cols):
        raise ShapeError(
            f"decode: skips {skips.stage2.shape} / {skips.stage1.shape} do not match features {fused.shape}"
        )
    x = ops.relu(ops.conv2d(ops.concat_channels([ops.upsample2x(fused), skips.stage2]), params.up1))
    x = ops.relu(ops.conv2d(ops.concat_channels([ops.upsample2x(x), skips.stage1]), params.up2))
    logits = ops.conv2d(x, params.out)
    height, width = logits.shape[:2]
    probs = ops.softmax(ops.reshape(logits, (height * width, 2)))
    return ops.reshape(probs, (height, width, 2))
