"""
Trainer — Teacher-Forced Clip Training
=======================================
Optimizes every model parameter with Adam on clips of L consecutive frames.

Per clip (frames c0 … c(L−1), ground truth everywhere):
  1. encode frame 1 → (X_1, M_1), h_1 = GAP(X_1 ⊗ M_1)
  2. advance h through every frame after frame 1 up to and including c0, so the
     clip sees the state inference would have; frames before c0 are encoded
     detached (no gradient into the encoder), the S-GRU steps stay tracked
  3. for each query c_i, i ≥ 1: memory = the min(k, i) preceding clip frames,
     run segment_step, add l_sem + λ·l_sup, advance h from the ground truth
  4. backward once over the summed clip loss

Adam steps once per `batch_videos` clips (gradients summed). The learning
rate is lr·decay^epoch. A non-finite clip loss aborts with NumericError.

Lifecycle:
  trainer = Trainer(model_cfg, train_cfg, flags)
  params = trainer.fit(dataset)               # or fit(dataset, init=params)
  trainer.history                             # [EpochLog, ...]
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import InputError, NumericError
from longmem import HiddenState, advance
from numerics import ops
from numerics.optim import AdamState, adam_step, lr_at_epoch
from numerics.tensor import DiffGraph, Tensor, backward
from segnet import (
    AblationFlags,
    ModelConfig,
    ModelParams,
    downsample_mask,
    frozen_names,
    prepare_first_frame,
    segment_step,
    start_state,
    total_loss,
)
from segnet.encoder import OUTPUT_STRIDE, encode
from segnet.model import FirstFrame, Params, encoder_params, gru_params
from vosdata.dataset import Sequence

logger = logging.getLogger("worker.trainer")


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lam: float = Field(default=1.0, gt=0.0, description="Weight λ of the supervised loss")
    lr: float = Field(default=1e-4, gt=0.0, description="Initial learning rate")
    lr_decay: float = Field(default=0.95, gt=0.0, le=1.0, description="Learning-rate factor per epoch")
    weight_decay: float = Field(default=1e-5, ge=0.0, description="Decoupled weight decay")
    clip_length: int = Field(default=5, ge=2, description="Frames per training clip")
    epochs: int = Field(default=10, ge=0)
    batch_videos: int = Field(default=1, ge=1, description="Clips per optimizer step")
    seed: int = 0


@dataclass
class EpochLog:
    """One CSV row; epochs count from 0, so lr == base·decay^epoch."""

    epoch: int
    lr: float
    mean_loss: float

    def csv(self) -> str:
        return f"{self.epoch},{self.lr!r},{self.mean_loss:.6f}"


EPOCH_CSV_HEADER = "epoch,lr,mean_loss"
ENCODER_NAMES = ("encoder.stage1", "encoder.stage2", "encoder.stage3")


# ── Clip loss ───────────────────────────────────────────────────────────


def clip_start_state(
    params: Params,
    seq: Sequence,
    first: FirstFrame,
    start: int,
    cfg: ModelConfig,
    flags: AblationFlags,
    start_features: Optional[Tensor] = None,
) -> HiddenState:
    """Long-term state after frames 1 … start (0-based), from ground-truth masks.

    `start_features` replaces the encoding of frame `start` when the caller
    already holds a tracked one.
    """
    state = start_state(first, cfg)
    if flags.disable_long or start == 0:
        return state

    detached = encoder_params({name: Tensor(params[name].data) for name in ENCODER_NAMES})
    gru = gru_params(params)
    for t in range(1, start + 1):
        if t == start and start_features is not None:
            features = start_features
        else:
            features = encode(seq.image(t), detached).features
        state = advance(state, features, downsample_mask(seq.mask(t), OUTPUT_STRIDE), gru, cfg.gap_mode)
    return state


def clip_loss(
    params: Params,
    seq: Sequence,
    start: int,
    length: int,
    cfg: ModelConfig,
    flags: AblationFlags,
    lam: float,
) -> Tensor:
    """Summed l_sem + λ·l_sup over the queries of one teacher-forced clip."""
    if length < 2 or start < 0 or start + length > len(seq):
        raise InputError(f"{seq.name}: clip [{start}, {start + length}) does not fit {len(seq)} frames")

    first, first_encoded = prepare_first_frame(seq.image(0), seq.mask(0), params)

    enc = encoder_params(params)
    clip = list(range(start, start + length))
    encoded = {t: first_encoded if t == 0 else encode(seq.image(t), enc) for t in clip}

    state = clip_start_state(params, seq, first, start, cfg, flags, start_features=encoded[start].features)

    k = cfg.graph.k
    total: Tensor = Tensor(0.0)
    for i in range(1, length):
        memory = clip[max(0, i - k) : i]
        query = clip[i]
        result = segment_step(
            [encoded[t] for t in memory] + [encoded[query]],
            [seq.mask(t) for t in memory],
            state,
            first,
            params,
            cfg,
            flags,
            gt_mask=seq.mask(query),
        )
        total = ops.add(total, total_loss(result.l_sem, result.l_sup, lam))
        state = result.state
    return total


# ── Trainer ─────────────────────────────────────────────────────────────


@dataclass
class Trainer:
    """Runs epochs of clip training and keeps the per-epoch log."""

    model_cfg: ModelConfig
    train_cfg: TrainConfig
    flags: AblationFlags = field(default_factory=AblationFlags)
    on_epoch: Optional[Callable[[EpochLog], None]] = None
    history: list[EpochLog] = field(default_factory=list)

    def _clip_starts(self, rng: np.random.Generator, dataset: list[Sequence]) -> list[tuple[Sequence, int, int]]:
        plan = []
        for seq in dataset:
            if len(seq) < 2:
                logger.warning(f"{seq.name}: fewer than 2 frames, skipped")
                continue
            length = min(self.train_cfg.clip_length, len(seq))
            plan.append((seq, int(rng.integers(0, len(seq) - length + 1)), length))
        return plan

    def fit(self, dataset: list[Sequence], init: Optional[ModelParams] = None) -> ModelParams:
        tc = self.train_cfg
        params = init if init is not None else ModelParams.initialize(self.model_cfg, tc.seed)
        params.validate(self.model_cfg)
        trainable = [n for n in params.names if n not in frozen_names(self.flags)]
        adam = AdamState.zeros({n: params.values[n] for n in trainable})
        rng = np.random.default_rng([tc.seed, 1])
        logger.info(
            f"training {self.flags.variant} model: {len(trainable)} trainable parameters, "
            f"{tc.epochs} epochs over {len(dataset)} sequences"
        )

        for epoch in range(tc.epochs):
            lr = lr_at_epoch(tc.lr, tc.lr_decay, epoch)
            losses: list[float] = []
            pending: dict[str, np.ndarray] = {}
            pending_clips = 0

            for seq, start, length in self._clip_starts(rng, dataset):
                graph = DiffGraph()
                loss = clip_loss(
                    params.bind(graph), seq, start, length, self.model_cfg, self.flags, tc.lam
                )
                value = loss.item()
                if not np.isfinite(value):
                    raise NumericError(f"non-finite loss {value} at epoch {epoch}, sequence {seq.name}")
                grads = backward(graph, loss)
                for name in trainable:
                    pending[name] = pending[name] + grads[name] if name in pending else grads[name]
                pending_clips += 1
                losses.append(value)

                if pending_clips == tc.batch_videos:
                    params, adam = self._step(params, adam, pending, lr)
                    pending, pending_clips = {}, 0

            if pending_clips:
                params, adam = self._step(params, adam, pending, lr)

            log = EpochLog(epoch=epoch, lr=lr, mean_loss=float(np.mean(losses)) if losses else 0.0)
            self.history.append(log)
            logger.info(f"epoch {log.epoch}: mean loss {log.mean_loss:.4f}, lr {lr:.3e}")
            if self.on_epoch:
                self.on_epoch(log)

        return params

    def _step(
        self, params: ModelParams, adam: AdamState, grads: dict[str, np.ndarray], lr: float
    ) -> tuple[ModelParams, AdamState]:
        current = {name: params.values[name] for name in grads}
        updated, adam = adam_step(adam, current, grads, lr, self.train_cfg.weight_decay)
        return params.replace(updated), adam
