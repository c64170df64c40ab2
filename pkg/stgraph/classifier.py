"""
Semi-Supervised Node Classifier
================================
Rasterizes per-frame feature maps and masks onto graph nodes, classifies the
filtered features with a two-class softmax head, and scores the labeled
(memory-frame) nodes with cross-entropy. Query-frame nodes carry no label.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from errors import ShapeError
from numerics import ops
from numerics.tensor import ArrayLike, Tensor, as_tensor

from .graph import GraphConfig


@dataclass
class GcnHead:
    weights: Tensor  # d×2: background, object

    def __post_init__(self) -> None:
        self.weights = as_tensor(self.weights)
        if self.weights.ndim != 2 or self.weights.shape[1] != 2:
            raise ShapeError(f"classifier head must be d×2, got {self.weights.shape}")


@dataclass
class NodeLabels:
    labels: np.ndarray    # int64 class per node
    selector: np.ndarray  # 1.0 on memory-frame nodes, 0.0 on the query frame

    @property
    def labeled_count(self) -> int:
        return int(self.selector.sum())


def node_features(features: Sequence[ArrayLike]) -> Tensor:
    """Stack (k+1) h×w×d maps, oldest first, into the N×d node matrix."""
    flat = []
    for fmap in features:
        fmap = as_tensor(fmap)
        if fmap.ndim != 3:
            raise ShapeError(f"node_features expects h×w×d maps, got {fmap.shape}")
        h, w, d = fmap.shape
        flat.append(ops.reshape(fmap, (h * w, d)))
    return ops.concat_rows(flat)


def rasterize_labels(memory_masks: Sequence[np.ndarray], cfg: GraphConfig) -> NodeLabels:
    """Labels for the k memory frames (oldest first); the query frame is unlabeled."""
    if len(memory_masks) != cfg.k:
        raise ShapeError(f"expected {cfg.k} memory masks, got {len(memory_masks)}")
    per_frame = cfg.w * cfg.h
    labels = np.zeros(cfg.node_count, dtype=np.int64)
    for f, mask in enumerate(memory_masks):
        mask = np.asarray(mask)
        if mask.shape != (cfg.h, cfg.w):
            raise ShapeError(f"memory mask {f} is {mask.shape}, grid is {(cfg.h, cfg.w)}")
        labels[f * per_frame : (f + 1) * per_frame] = (mask.reshape(-1) > 0).astype(np.int64)
    selector = np.zeros(cfg.node_count, dtype=np.float64)
    selector[: cfg.k * per_frame] = 1.0
    return NodeLabels(labels=labels, selector=selector)


def gcn_classify(Xgcf: ArrayLike, head: GcnHead) -> Tensor:
    return ops.softmax(ops.matmul(Xgcf, head.weights))


def loss_sem(probs: ArrayLike, labels: NodeLabels) -> Tensor:
    """Cross-entropy over the labeled nodes only."""
    return ops.cross_entropy(probs, labels.labels, labels.selector)


def query_features(Xgcf: ArrayLike, cfg: GraphConfig) -> Tensor:
    """The query-frame block of the node matrix, reshaped to h×w×d."""
    Xgcf = as_tensor(Xgcf)
    if Xgcf.ndim != 2 or Xgcf.shape[0] != cfg.node_count:
        raise ShapeError(f"query_features: {Xgcf.shape} rows for {cfg.node_count} nodes")
    per_frame = cfg.w * cfg.h
    block = Xgcf
    if cfg.k:
        block = ops.gather_rows(Xgcf, np.arange(cfg.k * per_frame, cfg.node_count))
    return ops.reshape(block, (cfg.h, cfg.w, Xgcf.shape[1]))
