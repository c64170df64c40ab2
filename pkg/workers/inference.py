"""
Inference — Semi-Supervised Mask Propagation
=============================================
Per sequence:
  frame 1       copy the given ground-truth mask; h_1 = GAP(X_1 ⊗ M_1)
  frame t ≥ 2   short-term memory = the min(k, t−1) most recent frames and
                their predicted masks; segment_step; the state advances
                from the predicted (thresholded) mask

Output layout: <out>/<seq>/masks/00001.pgm …, written all-or-nothing.
Sequences are independent and processed in name order.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence as Seq

import numpy as np

from longmem import HiddenState
from segnet import AblationFlags, ModelConfig, ModelParams, prepare_first_frame, segment_step, start_state
from segnet.encoder import Encoded, encode
from segnet.model import encoder_params
from storage.atomic import PathLike, atomic_directory
from vosdata.dataset import MASKS_DIR, Sequence, frame_filename
from vosdata.pgm import write_mask

logger = logging.getLogger("worker.inference")


@dataclass
class SequencePrediction:
    name: str
    masks: np.ndarray          # T×H×W uint8
    seconds_per_frame: float   # over predicted frames (0 for single-frame sequences)
    state: HiddenState         # long-term memory after the last frame


def predict_sequence(
    seq: Sequence,
    params: ModelParams,
    cfg: ModelConfig,
    flags: AblationFlags = AblationFlags(),
) -> SequencePrediction:
    tensors = params.constants()
    enc = encoder_params(tensors)
    first, first_encoded = prepare_first_frame(seq.image(0), seq.mask(0), tensors)
    state = start_state(first, cfg)

    k = cfg.graph.k
    masks = [seq.mask(0).astype(np.uint8)]
    window: list[Encoded] = [first_encoded]
    started = time.perf_counter()
    for t in range(1, len(seq)):
        query = encode(seq.image(t), enc)
        memory_masks = masks[max(0, t - k) : t]
        memory = window[-len(memory_masks):] if memory_masks else []
        result = segment_step(memory + [query], memory_masks, state, first, tensors, cfg, flags)
        masks.append(result.mask)
        state = result.state
        window = (window + [query])[-k:] if k else []
    elapsed = time.perf_counter() - started

    predicted = len(seq) - 1
    return SequencePrediction(
        name=seq.name,
        masks=np.stack(masks),
        seconds_per_frame=elapsed / predicted if predicted else 0.0,
        state=state,
    )


def write_predictions(root: Path, prediction: SequencePrediction) -> None:
    for t, mask in enumerate(prediction.masks):
        write_mask(root / prediction.name / MASKS_DIR / frame_filename(t + 1), mask)


def run_inference(
    dataset: Seq[Sequence],
    params: ModelParams,
    cfg: ModelConfig,
    out: PathLike,
    flags: AblationFlags = AblationFlags(),
) -> float:
    """Predict and write every sequence; returns mean seconds per predicted frame."""
    params.validate(cfg)
    timings = []
    with atomic_directory(out) as scratch:
        for seq in dataset:
            prediction = predict_sequence(seq, params, cfg, flags)
            write_predictions(scratch, prediction)
            logger.info(f"{seq.name}: {len(seq)} frames, {prediction.seconds_per_frame:.4f} s/frame")
            if len(seq) > 1:
                timings.append(prediction.seconds_per_frame)
    mean = float(np.mean(timings)) if timings else 0.0
    logger.info(f"inference done: {len(dataset)} sequences, mean {mean:.4f} s/frame")
    return mean
