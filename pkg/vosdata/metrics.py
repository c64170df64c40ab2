"""
Region and Contour Metrics
===========================
  J  — intersection over union; 1.0 when both masks are empty
  F  — boundary F-measure under a Chebyshev pixel tolerance; 1.0 when both
       boundaries are empty, and an undefined precision or recall counts as 0
  mean / recall / decay per sequence, following the DAVIS convention
       (recall: fraction of frames scoring above 0.5; decay: first-quartile
       mean minus last-quartile mean)

A boundary pixel is a mask pixel that 4-connected erosion removes; pixels
on the image border count as boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from errors import InputError, ShapeError

RECALL_THRESHOLD = 0.5
DAVIS_TOLERANCE_FRACTION = 0.008
MIN_SCORED_FRAMES = 4  # one per quartile of the decay

_CROSS = ndimage.generate_binary_structure(2, 1)


def _binary_pair(pred: np.ndarray, gt: np.ndarray, where: str) -> tuple[np.ndarray, np.ndarray]:
    pred, gt = np.asarray(pred) > 0, np.asarray(gt) > 0
    if pred.shape != gt.shape:
        raise ShapeError(f"{where}: prediction {pred.shape} vs ground truth {gt.shape}")
    return pred, gt


def jaccard(pred: np.ndarray, gt: np.ndarray) -> float:
    pred, gt = _binary_pair(pred, gt, "jaccard")
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


def boundary(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask) > 0
    return mask & ~ndimage.binary_erosion(mask, structure=_CROSS, border_value=0)


def _within(points: np.ndarray, reference: np.ndarray, tol: int) -> np.ndarray:
    if tol == 0:
        return points & reference
    square = np.ones((2 * tol + 1, 2 * tol + 1), dtype=bool)
    return points & ndimage.binary_dilation(reference, structure=square)


def boundary_f(pred: np.ndarray, gt: np.ndarray, tol: int = 1) -> float:
    pred, gt = _binary_pair(pred, gt, "boundary_f")
    if tol < 0:
        raise InputError(f"boundary tolerance must be non-negative, got {tol}")
    pred_b, gt_b = boundary(pred), boundary(gt)
    n_pred, n_gt = np.count_nonzero(pred_b), np.count_nonzero(gt_b)
    if n_pred == 0 and n_gt == 0:
        return 1.0
    precision = np.count_nonzero(_within(pred_b, gt_b, tol)) / n_pred if n_pred else 0.0
    recall = np.count_nonzero(_within(gt_b, pred_b, tol)) / n_gt if n_gt else 0.0
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def davis_tolerance(shape: tuple[int, int]) -> int:
    """ceil(0.8% of the image diagonal)."""
    height, width = shape
    return math.ceil(DAVIS_TOLERANCE_FRACTION * math.hypot(height, width))


@dataclass(frozen=True)
class SequenceStats:
    mean: float
    recall: float
    decay: float


def sequence_stats(scores: Sequence[float], threshold: float = RECALL_THRESHOLD) -> SequenceStats:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape[0] < MIN_SCORED_FRAMES:
        raise InputError(
            f"need at least {MIN_SCORED_FRAMES} scored frames for quartile decay, got {scores.shape[0]}"
        )
    quartiles = np.array_split(scores, 4)
    return SequenceStats(
        mean=float(np.mean(scores)),
        recall=float(np.mean(scores > threshold)),
        decay=float(np.mean(quartiles[0]) - np.mean(quartiles[-1])),
    )
