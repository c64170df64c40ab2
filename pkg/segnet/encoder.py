"""
Toy Convolutional Encoder
==========================
Three 3×3 conv stages, each followed by ReLU, no biases:

  stage1  cin → e1   stride 1   (skip source, full resolution)
  stage2  e1  → e2   stride 2   (skip source, 1/2 resolution)
  stage3  e2  → d    stride 2   (features, 1/4 resolution)

Widths come from the kernels; ModelConfig.encoder_widths defaults to (16, 32).
"""

from __future__ import annotations

from dataclasses import dataclass

from errors import InputError, ShapeError
from numerics import ops
from numerics.tensor import ArrayLike, Tensor, as_tensor

STAGE1_CHANNELS = 16
STAGE2_CHANNELS = 32
OUTPUT_STRIDE = 4


@dataclass
class EncoderParams:
    stage1: Tensor
    stage2: Tensor
    stage3: Tensor


@dataclass
class Skips:
    stage1: Tensor  # H×W×e1
    stage2: Tensor  # H/2×W/2×e2


@dataclass
class Encoded:
    """One frame pushed through the encoder."""

    features: Tensor
    skips: Skips

    @property
    def image_shape(self) -> tuple[int, int]:
        return self.skips.stage1.shape[:2]


def encode(frame: ArrayLike, params: EncoderParams) -> Encoded:
    frame = as_tensor(frame)
    if frame.ndim != 3:
        raise ShapeError(f"encode expects an H×W×C image, got dims {frame.shape}")
    height, width = frame.shape[:2]
    if height % OUTPUT_STRIDE or width % OUTPUT_STRIDE:
        raise InputError(f"image {height}×{width} is not divisible by {OUTPUT_STRIDE}")

    s1 = ops.relu(ops.conv2d(frame, params.stage1, stride=1))
    s2 = ops.relu(ops.conv2d(s1, params.stage2, stride=2))
    s3 = ops.relu(ops.conv2d(s2, params.stage3, stride=2))
    return Encoded(features=s3, skips=Skips(stage1=s1, stage2=s2))
