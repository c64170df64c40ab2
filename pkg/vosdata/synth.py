"""
Synthetic Moving-Shapes Sequences
==================================
Each sequence shows one textured disk or rectangle bouncing around a
smooth random background. The object's brightness drifts slowly over time.
With probability `occluder_rate` a sequence gets one occlusion interval,
starting at frame frames//2 (0-based) and lasting `occlusion_length` frames.
During it a dark occluder covers the object, and the ground-truth mask is
empty.

Determinism: sequence i draws from numpy.random.default_rng([seed, i]), so
output bytes depend only on the config.

Layout:
  <out>/seq000/frames/00001.pgm ...
  <out>/seq000/masks/00001.pgm  ...
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import ndimage

from storage.atomic import PathLike, atomic_directory

from .pgm import write_mask, write_pgm

logger = logging.getLogger("vosdata.synth")

ShapeKind = Literal["disk", "rectangle"]

OCCLUDER_LEVEL = 12
OCCLUDER_MARGIN = 2


class SynthConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    sequences: int = Field(default=20, ge=1, description="Number of sequences")
    frames: int = Field(default=24, ge=1, description="Frames per sequence")
    width: int = Field(default=64, ge=16, description="Image width (divisible by 4)")
    height: int = Field(default=64, ge=16, description="Image height (divisible by 4)")
    shapes: tuple[ShapeKind, ...] = ("disk", "rectangle")
    speed_min: float = Field(default=1.0, ge=0.0, description="Pixels per frame")
    speed_max: float = Field(default=3.0, ge=0.0, description="Pixels per frame")
    drift: float = Field(default=0.01, ge=0.0, description="Object brightness change per frame (fraction of 255)")
    occluder_rate: float = Field(default=0.0, ge=0.0, le=1.0, description="Probability a sequence is occluded")
    occlusion_length: int = Field(default=3, ge=1, description="Frames per occlusion interval")
    seed: int = 0

    @field_validator("width", "height")
    @classmethod
    def must_divide_by_four(cls, v: int) -> int:
        if v % 4:
            raise ValueError(f"image size must be divisible by 4, got {v}")
        return v

    @field_validator("shapes")
    @classmethod
    def shapes_must_not_be_empty(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        if not v:
            raise ValueError("at least one shape kind is required")
        return v

    @model_validator(mode="after")
    def speed_range_must_be_ordered(self) -> "SynthConfig":
        if self.speed_min > self.speed_max:
            raise ValueError(f"speed_min {self.speed_min} exceeds speed_max {self.speed_max}")
        return self


@dataclass
class SyntheticSequence:
    name: str
    frames: np.ndarray  # T×H×W uint8
    masks: np.ndarray   # T×H×W uint8 {0, 1}
    kind: str
    occluded: tuple[int, ...]  # 0-based frame indices with the object hidden


def occlusion_frames(cfg: SynthConfig) -> range:
    start = cfg.frames // 2
    return range(start, min(cfg.frames, start + cfg.occlusion_length))


def _texture(rng: np.random.Generator, height: int, width: int, sigma: float) -> np.ndarray:
    field = ndimage.gaussian_filter(rng.standard_normal((height, width)), sigma=sigma, mode="wrap")
    spread = field.max() - field.min()
    return (field - field.min()) / spread if spread > 0 else np.zeros_like(field)


def _bounce(pos: np.ndarray, vel: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> None:
    """Advance one frame in place, reflecting off [lo, hi] per axis."""
    pos += vel
    for axis in range(2):
        if pos[axis] < lo[axis]:
            pos[axis] = 2 * lo[axis] - pos[axis]
            vel[axis] = -vel[axis]
        elif pos[axis] > hi[axis]:
            pos[axis] = 2 * hi[axis] - pos[axis]
            vel[axis] = -vel[axis]
        pos[axis] = min(max(pos[axis], lo[axis]), hi[axis])


def generate_sequence(cfg: SynthConfig, index: int) -> SyntheticSequence:
    rng = np.random.default_rng([cfg.seed, index])
    H, W = cfg.height, cfg.width
    kind = cfg.shapes[int(rng.integers(len(cfg.shapes)))]

    # half extents (rows, cols); a disk uses the first as its radius
    short = min(H, W)
    if kind == "disk":
        radius = rng.uniform(short / 8, short / 5)
        half = np.array([radius, radius])
    else:
        half = rng.uniform(short / 10, short / 5, size=2)

    lo = np.ceil(half) + 1
    hi = np.array([H, W], dtype=np.float64) - np.ceil(half) - 2
    pos = rng.uniform(lo, hi)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    speed = rng.uniform(cfg.speed_min, cfg.speed_max)
    vel = speed * np.array([np.sin(angle), np.cos(angle)])

    background = 40.0 + 70.0 * _texture(rng, H, W, sigma=3.0)
    object_texture = _texture(rng, H, W, sigma=1.5)
    base_level = rng.uniform(170.0, 210.0)
    drift_sign = 1.0 if rng.random() < 0.5 else -1.0
    occluded = tuple(occlusion_frames(cfg)) if rng.random() < cfg.occluder_rate else ()

    rows, cols = np.mgrid[0:H, 0:W]
    frames = np.empty((cfg.frames, H, W), dtype=np.uint8)
    masks = np.empty((cfg.frames, H, W), dtype=np.uint8)
    for t in range(cfg.frames):
        if t:
            _bounce(pos, vel, lo, hi)
        dy, dx = rows - pos[0], cols - pos[1]
        if kind == "disk":
            inside = dy * dy + dx * dx <= half[0] * half[0]
        else:
            inside = (np.abs(dy) <= half[0]) & (np.abs(dx) <= half[1])

        level = base_level + drift_sign * cfg.drift * 255.0 * t
        # texture moves with the object
        shifted = np.roll(object_texture, (int(round(pos[0])), int(round(pos[1]))), axis=(0, 1))
        image = np.where(inside, level + 30.0 * (shifted - 0.5), background)

        if t in occluded:
            cover = (np.abs(dy) <= half[0] + OCCLUDER_MARGIN) & (np.abs(dx) <= half[1] + OCCLUDER_MARGIN)
            image = np.where(cover, OCCLUDER_LEVEL, image)
            inside = np.zeros_like(inside)

        frames[t] = np.clip(np.rint(image), 0, 255).astype(np.uint8)
        masks[t] = inside.astype(np.uint8)

    return SyntheticSequence(
        name=f"seq{index:03d}", frames=frames, masks=masks, kind=kind, occluded=occluded
    )


def write_sequence(root: Path, seq: SyntheticSequence) -> None:
    for t in range(seq.frames.shape[0]):
        write_pgm(root / seq.name / "frames" / f"{t + 1:05d}.pgm", seq.frames[t])
        write_mask(root / seq.name / "masks" / f"{t + 1:05d}.pgm", seq.masks[t])


def synth_generate(cfg: SynthConfig, out: PathLike) -> int:
    """Write the whole synthetic set under `out`; returns the sequence count."""
    with atomic_directory(out) as scratch:
        for i in range(cfg.sequences):
            seq = generate_sequence(cfg, i)
            write_sequence(scratch, seq)
            logger.debug(f"{seq.name}: {seq.kind}, occluded frames {list(seq.occluded)}")
    logger.info(f"wrote {cfg.sequences} sequences × {cfg.frames} frames to {out}")
    return cfg.sequences
