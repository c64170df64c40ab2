"""
Finite-Difference Gradient Checker
===================================
Compares reverse-mode gradients against central differences
(f(p + eps) - f(p - eps)) / (2 eps) for every entry of every registered
parameter and reports the worst relative error, using the denominator
max(|analytic|, |numeric|, 1e-8).

The forward callable receives a mapping name -> Tensor and returns a scalar
Tensor. Anything it closes over is treated as a frozen constant and is not
checked.
"""

from __future__ import annotations

import logging
from typing import Callable, Mapping, Optional

import numpy as np

from errors import InputError, NumericError

from .tensor import DiffGraph, Tensor, backward

logger = logging.getLogger("numerics.gradcheck")

Forward = Callable[[Mapping[str, Tensor]], Tensor]

DENOMINATOR_FLOOR = 1e-8


def _scalar(value: Tensor, where: str) -> float:
    result = float(value.data)
    if not np.isfinite(result):
        raise NumericError(f"forward value is not finite ({result}) {where}")
    return result


def grad_check(
    forward: Forward,
    params: Mapping[str, np.ndarray],
    eps: float = 1e-5,
    max_entries: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Worst relative error between analytic and central-difference gradients.

    With `max_entries`, each parameter is checked at that many entries drawn
    without replacement (seeded); by default every entry is checked.
    """
    if eps <= 0:
        raise InputError(f"eps must be positive, got {eps}")

    graph = DiffGraph()
    tracked = {name: graph.parameter(name, value) for name, value in params.items()}
    loss = forward(tracked)
    _scalar(loss, "at the unperturbed point")
    analytic = backward(graph, loss)

    # Perturbations are written in place into these arrays; the untracked
    # Tensors below wrap them without copying.
    work = {name: np.array(value, dtype=np.float64, copy=True) for name, value in params.items()}
    constants = {name: Tensor(array) for name, array in work.items()}

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in params:
        flat = work[name].reshape(-1)
        grad = analytic[name].reshape(-1)
        entries = np.arange(flat.size)
        if max_entries is not None and max_entries < flat.size:
            entries = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        name_worst = 0.0
        for idx in entries:
            original = flat[idx]
            flat[idx] = original + eps
            f_plus = _scalar(forward(constants), f"at {name}[{idx}] + eps")
            flat[idx] = original - eps
            f_minus = _scalar(forward(constants), f"at {name}[{idx}] - eps")
            flat[idx] = original

            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(grad[idx]), abs(numeric), DENOMINATOR_FLOOR)
            name_worst = max(name_worst, abs(grad[idx] - numeric) / denom)
        logger.debug(f"{name}: {entries.size} entries, worst relative error {name_worst:.3e}")
        worst = max(worst, name_worst)
    return worst
