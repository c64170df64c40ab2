"""
Spatial-Temporal Graph Construction
====================================
Builds the windowed graph over (k+1) frames of a w×h feature grid.

Node order (row-major, oldest memory frame first, query frame last):
  node(f, r, c) = (f·h + r)·w + c          f ∈ [0, k], query frame f = k

Edges (no self-edges, windows clipped at the grid border):
  spatial   — every node inside the hs×ws window at the same frame
  temporal  — every node inside the ht×wt window at frame f+1
              (bidirectional mode adds the mirrored window at frame f−1)

Storage is CSR: `indptr` row offsets, `indices` strictly increasing per row,
and `rows` (the expanded row index of each stored edge) for gather kernels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

logger = logging.getLogger("stgraph.graph")

TemporalMode = Literal["directed-next", "bidirectional"]


class GraphConfig(BaseModel):
    """Graph geometry. Frozen so built graphs can be cached per config."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    k: int = Field(default=2, ge=0, description="Short-term memory frames before the query frame")
    w: int = Field(default=16, ge=1, description="Feature-grid width")
    h: int = Field(default=16, ge=1, description="Feature-grid height")
    ws: int = Field(default=3, ge=1, description="Spatial window width")
    hs: int = Field(default=3, ge=1, description="Spatial window height")
    wt: int = Field(default=3, ge=1, description="Temporal window width")
    ht: int = Field(default=3, ge=1, description="Temporal window height")
    temporal_mode: TemporalMode = "bidirectional"

    @field_validator("ws", "hs", "wt", "ht")
    @classmethod
    def window_must_be_odd(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"window extents must be odd, got {v}")
        return v

    @property
    def frames(self) -> int:
        return self.k + 1

    @property
    def node_count(self) -> int:
        return self.frames * self.w * self.h


def node_index(cfg: GraphConfig, frame: int, row: int, col: int) -> int:
    return (frame * cfg.h + row) * cfg.w + col


def node_position(cfg: GraphConfig, node: int) -> tuple[int, int, int]:
    """Inverse of node_index: (frame, row, col)."""
    frame, rest = divmod(int(node), cfg.w * cfg.h)
    row, col = divmod(rest, cfg.w)
    return frame, row, col


@dataclass(frozen=True, eq=False)
class STGraph:
    cfg: GraphConfig
    indptr: np.ndarray
    indices: np.ndarray
    rows: np.ndarray

    @property
    def node_count(self) -> int:
        return self.indptr.shape[0] - 1

    @property
    def edge_count(self) -> int:
        return self.indices.shape[0]

    def neighbours(self, node: int) -> np.ndarray:
        return self.indices[self.indptr[node] : self.indptr[node + 1]]


# ── Construction ────────────────────────────────────────────────────────


def _window(height: int, width: int) -> list[tuple[int, int]]:
    return [
        (dr, dc)
        for dr in range(-(height // 2), height // 2 + 1)
        for dc in range(-(width // 2), width // 2 + 1)
    ]


def _offsets(cfg: GraphConfig) -> list[tuple[int, int, int]]:
    offsets = [(0, dr, dc) for dr, dc in _window(cfg.hs, cfg.ws) if (dr, dc) != (0, 0)]
    offsets += [(1, dr, dc) for dr, dc in _window(cfg.ht, cfg.wt)]
    if cfg.temporal_mode == "bidirectional":
        offsets += [(-1, dr, dc) for dr, dc in _window(cfg.ht, cfg.wt)]
    return offsets


@lru_cache(maxsize=32)
def build_graph(cfg: GraphConfig) -> STGraph:
    """Windowed spatial-temporal graph for `cfg`; cached, so callers must not mutate the arrays."""
    shape = (cfg.frames, cfg.h, cfg.w)
    n = cfg.node_count
    frame, row, col = np.unravel_index(np.arange(n, dtype=np.int64), shape)

    sources, targets = [], []
    for df, dr, dc in _offsets(cfg):
        f2, r2, c2 = frame + df, row + dr, col + dc
        inside = (
            (f2 >= 0) & (f2 < cfg.frames) & (r2 >= 0) & (r2 < cfg.h) & (c2 >= 0) & (c2 < cfg.w)
        )
        sources.append(np.flatnonzero(inside))
        targets.append(np.ravel_multi_index((f2[inside], r2[inside], c2[inside]), shape))

    src = np.concatenate(sources).astype(np.int64)
    dst = np.concatenate(targets).astype(np.int64)
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]

    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])

    logger.debug(f"built graph: {n} nodes, {dst.shape[0]} edges ({cfg.temporal_mode})")
    return STGraph(cfg=cfg, indptr=indptr, indices=dst, rows=src)
