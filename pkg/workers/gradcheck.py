"""
End-to-End Gradient Check
==========================
Builds a two-frame 8×8 toy video and checks the gradient of the full
training loss (l_sem + λ·l_sup) for the clip [frame 1, frame 2] against
central differences.

With `frames=3` the toy gets a third frame and the clip moves to
[frame 2, frame 3]; the S-GRU update then sits on the gradient path as
well. On the two-frame toy gru.W receives an exact zero gradient.

Toy model: cin = 1, d = 4, k = 1, encoder widths (4, 8), decoder widths
(8, 4), He-uniform init. The narrow widths keep the check to a few thousand
entries; the He scale keeps activations O(1), so every gradient entry stays
well above the finite-difference noise of an O(1) loss.
"""

from __future__ import annotations

import logging
from typing import Callable, Mapping, Optional

import numpy as np

from errors import InputError
from numerics.gradcheck import grad_check
from numerics.tensor import Tensor
from segnet import AblationFlags, ModelConfig, ModelParams
from stgraph import GraphConfig
from vosdata.dataset import Sequence

from .trainer import clip_loss

logger = logging.getLogger("worker.gradcheck")

TOY_SIZE = 8
TOY_FRAMES = 2
TOY_D = 4
TOY_SIDE = 5


def toy_sequence(seed: int = 0, frames: int = TOY_FRAMES) -> Sequence:
    """A 5×5 bright square sliding one pixel right per frame over a noisy background."""
    if not 2 <= frames <= TOY_SIZE - TOY_SIDE + 1:
        raise InputError(f"toy sequence needs 2 … {TOY_SIZE - TOY_SIDE + 1} frames, got {frames}")
    rng = np.random.default_rng(seed)
    images = np.empty((frames, TOY_SIZE, TOY_SIZE), dtype=np.uint8)
    masks = []
    for t in range(frames):
        mask = np.zeros((TOY_SIZE, TOY_SIZE), dtype=np.uint8)
        mask[0:TOY_SIDE, t : t + TOY_SIDE] = 1
        background = rng.uniform(20.0, 120.0, size=(TOY_SIZE, TOY_SIZE))
        foreground = rng.uniform(170.0, 240.0, size=(TOY_SIZE, TOY_SIZE))
        images[t] = np.rint(np.where(mask > 0, foreground, background)).astype(np.uint8)
        masks.append(mask)
    return Sequence(name="toy", frames=images, masks=masks)


def toy_config() -> ModelConfig:
    return ModelConfig(
        cin=1,
        d=TOY_D,
        graph=GraphConfig(k=1),
        encoder_widths=(4, 8),
        decoder_widths=(8, 4),
    )


def toy_params(cfg: ModelConfig, seed: int = 0) -> ModelParams:
    return ModelParams.initialize(cfg, seed, scheme="he")


def toy_loss(
    seq: Sequence,
    cfg: ModelConfig,
    flags: AblationFlags = AblationFlags(),
    lam: float = 1.0,
) -> Callable[[Mapping[str, Tensor]], Tensor]:
    """Loss of the last two-frame clip of `seq`."""
    start = len(seq) - 2
    return lambda params: clip_loss(params, seq, start, 2, cfg, flags, lam)


def run_gradcheck(
    seed: int = 0,
    eps: float = 1e-5,
    max_entries: Optional[int] = None,
    frames: int = TOY_FRAMES,
) -> float:
    """Worst relative gradient error of the toy problem."""
    cfg = toy_config()
    params = toy_params(cfg, seed)
    forward = toy_loss(toy_sequence(seed, frames), cfg)
    error = grad_check(forward, params.values, eps=eps, max_entries=max_entries, seed=seed)
    logger.info(f"gradcheck ({frames} frames, seed {seed}, eps {eps}): max relative error {error:.3e}")
    return error
