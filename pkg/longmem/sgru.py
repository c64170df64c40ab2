"""
Long-Term Object Memory (S-GRU)
================================
One d-vector per object, updated once per frame:

  x      = GAP(X ⊗ M)                     masked global average pooling
  z      = σ(W·[x; h_prev])               single update gate, no bias
  h_new  = (1 − z) ⊙ h_prev + z ⊙ x

GAP divides by the full grid area w·h ("total"). The "area" mode divides by
the number of mask pixels instead, and yields 0 for an empty mask.

Lifecycle:
  state = init_state(X1, M1)                       # h_1, frame 1
  state = advance(state, X2, M2, params)           # h_2, frame 2
  ...
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from errors import ShapeError
from numerics import ops
from numerics.tensor import ArrayLike, Tensor, as_tensor

GapMode = Literal["total", "area"]


@dataclass
class HiddenState:
    h: Tensor
    frame: int = 1

    @property
    def dim(self) -> int:
        return self.h.shape[0]


@dataclass
class GruParams:
    W: Tensor  # d×2d, applied to [x; h]

    def __post_init__(self) -> None:
        self.W = as_tensor(self.W)
        if self.W.ndim != 2 or self.W.shape[1] != 2 * self.W.shape[0]:
            raise ShapeError(f"gate matrix must be d×2d, got {self.W.shape}")


def masked_gap(X: ArrayLike, M: np.ndarray, mode: GapMode = "total") -> Tensor:
    """Pool the masked h×w×d map down to a d-vector."""
    X = as_tensor(X)
    M = np.asarray(M, dtype=np.float64)
    if X.ndim != 3 or M.shape != X.shape[:2]:
        raise ShapeError(f"masked_gap: features {X.shape} vs mask {M.shape}")
    h, w, d = X.shape
    pooled = ops.sum(ops.reshape(ops.mul(X, M[:, :, None]), (h * w, d)), axis=0)
    if mode == "area":
        area = float(M.sum())
        return ops.mul(pooled, 1.0 / area if area else 0.0)
    return ops.mul(pooled, 1.0 / (h * w))


def sgru_step(x: ArrayLike, h_prev: ArrayLike, params: GruParams) -> Tensor:
    x, h_prev = as_tensor(x), as_tensor(h_prev)
    d = params.W.shape[0]
    if x.shape != (d,) or h_prev.shape != (d,):
        raise ShapeError(f"sgru_step: x {x.shape}, h {h_prev.shape}, gate expects d={d}")
    stacked = ops.concat_rows([ops.reshape(x, (d, 1)), ops.reshape(h_prev, (d, 1))])
    z = ops.reshape(ops.sigmoid(ops.matmul(params.W, stacked)), (d,))
    return ops.convex_blend(z, x, h_prev)


def init_state(X1: ArrayLike, M1: np.ndarray, mode: GapMode = "total") -> HiddenState:
    return HiddenState(h=masked_gap(X1, M1, mode), frame=1)


def advance(
    state: HiddenState,
    X_prev: ArrayLike,
    M_prev: np.ndarray,
    params: GruParams,
    mode: GapMode = "total",
) -> HiddenState:
    """Fold frame `state.frame + 1` (features and mask) into the memory."""
    x = masked_gap(X_prev, M_prev, mode)
    return HiddenState(h=sgru_step(x, state.h, params), frame=state.frame + 1)
