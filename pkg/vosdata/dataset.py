"""
Dataset Folders
================
Reads the on-disk layout written by `synth` (and by DAVIS-style exports):

  <root>/<sequence>/frames/00001.pgm ...
  <root>/<sequence>/masks/00001.pgm  ...

Frames become H×W×1 float images scaled to [0, 1]; masks become {0, 1}.
Sequences are listed in lexicographic order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

import numpy as np

from errors import DataIOError, InputError, MissingFilesError
from storage.atomic import PathLike

from .pgm import read_mask, read_pgm

logger = logging.getLogger("vosdata.dataset")

FRAMES_DIR = "frames"
MASKS_DIR = "masks"

MaskPolicy = Literal["all", "first"]


def frame_filename(t: int) -> str:
    """File name of 1-based frame t."""
    return f"{t:05d}.pgm"


@dataclass
class Sequence:
    name: str
    frames: np.ndarray               # T×H×W uint8
    masks: list[Optional[np.ndarray]]  # per frame; None where not loaded

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1:]

    def image(self, t: int) -> np.ndarray:
        """0-based frame t as an H×W×1 float image in [0, 1]."""
        return (self.frames[t].astype(np.float64) / 255.0)[:, :, None]

    def mask(self, t: int) -> np.ndarray:
        mask = self.masks[t]
        if mask is None:
            raise InputError(f"{self.name}: no ground-truth mask loaded for frame {t + 1}")
        return mask


def list_sequences(root: PathLike) -> list[str]:
    root = Path(root)
    if not root.is_dir():
        raise DataIOError(f"dataset root {root} is not a directory")
    return sorted(p.name for p in root.iterdir() if (p / FRAMES_DIR).is_dir())


def load_sequence(path: PathLike, masks: MaskPolicy = "all") -> Sequence:
    """Load one sequence directory. `masks="first"` requires only frame 1's mask."""
    path = Path(path)
    frame_files = sorted((path / FRAMES_DIR).glob("*.pgm"))
    if not frame_files:
        raise DataIOError(f"{path}: no frames under {FRAMES_DIR}/")
    expected = [frame_filename(t) for t in range(1, len(frame_files) + 1)]
    if [f.name for f in frame_files] != expected:
        raise DataIOError(f"{path}: frames are not numbered 00001.pgm … consecutively")

    frames = np.stack([read_pgm(f) for f in frame_files])
    wanted = expected if masks == "all" else expected[:1]
    missing = [str(path / MASKS_DIR / name) for name in wanted if not (path / MASKS_DIR / name).is_file()]
    if missing:
        raise MissingFilesError(missing)

    loaded: list[Optional[np.ndarray]] = [None] * len(expected)
    for t, name in enumerate(wanted):
        mask = read_mask(path / MASKS_DIR / name)
        if mask.shape != frames.shape[1:]:
            raise DataIOError(f"{path}: mask {name} is {mask.shape}, frames are {frames.shape[1:]}")
        loaded[t] = mask
    return Sequence(name=path.name, frames=frames, masks=loaded)


def load_dataset(root: PathLike, masks: MaskPolicy = "all") -> list[Sequence]:
    names = list_sequences(root)
    if not names:
        raise DataIOError(f"no sequences found under {root}")
    sequences = [load_sequence(Path(root) / name, masks) for name in names]
    logger.info(f"loaded {len(sequences)} sequences from {root}")
    return sequences
