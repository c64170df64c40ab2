"""
Adam Optimizer
===============
Functional Adam: `adam_step` returns new parameter arrays and a new state,
never mutating its inputs.

Update (t = step after increment):
  p ← p − lr·wd·p                               (decoupled weight decay)
  m ← β1·m + (1 − β1)·g
  v ← β2·v + (1 − β2)·g²
  α ← lr·√(1 − β2^t) / (1 − β1^t)                (bias correction)
  p ← p − α·m / (√v + ε)

Defaults β1 = 0.9, β2 = 0.999, ε = 1e-8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from errors import ConfigError, ShapeError


@dataclass(frozen=True)
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, params: Mapping[str, np.ndarray], **hyper: float) -> "AdamState":
        return cls(
            m={name: np.zeros_like(p, dtype=np.float64) for name, p in params.items()},
            v={name: np.zeros_like(p, dtype=np.float64) for name, p in params.items()},
            **hyper,
        )


def adam_step(
    state: AdamState,
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    lr: float,
    weight_decay: float = 0.0,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update over every entry of `params`."""
    if lr <= 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    if set(params) != set(grads) or set(params) != set(state.m):
        raise ShapeError(
            f"adam_step: parameter names {sorted(params)} vs gradients {sorted(grads)} "
            f"vs state {sorted(state.m)}"
        )

    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    alpha = lr * math.sqrt(1.0 - b2**step) / (1.0 - b1**step)

    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name in sorted(params):
        p, g = params[name], grads[name]
        if p.shape != g.shape or p.shape != state.m[name].shape:
            raise ShapeError(f"adam_step: {name} has shape {p.shape}, gradient {g.shape}")
        if weight_decay:
            p = p - lr * weight_decay * p
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * g * g
        new_params[name] = p - alpha * m / (np.sqrt(v) + state.eps)
        new_m[name], new_v[name] = m, v

    return new_params, AdamState(
        m=new_m, v=new_v, step=step, beta1=b1, beta2=b2, eps=state.eps
    )


def lr_at_epoch(base_lr: float, decay: float, epoch: int) -> float:
    """Learning rate after `epoch` per-epoch decays."""
    return base_lr * decay**epoch
