"""
Ablation Study
===============
Trains the full model and the three single-mechanism ablations with the same
seed and step budget, predicts a held-out split, and scores it.

  full   all mechanisms on
  S      short-term graph memory off
  L      long-term S-GRU memory off
  W      unweighted adjacency (W1 = W2 = I, frozen)

CSV: variant,J_mean,F_mean,JF_mean
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence as Seq

from segnet import AblationFlags, ModelConfig, ModelParams
from vosdata.dataset import Sequence
from vosdata.evaluation import EvalReport, build_report, score_sequence, too_short_to_score
from vosdata.metrics import davis_tolerance

from .inference import predict_sequence
from .trainer import TrainConfig, Trainer

logger = logging.getLogger("worker.ablation")

ABLATION_CSV_HEADER = "variant,J_mean,F_mean,JF_mean"

VARIANTS: dict[str, AblationFlags] = {
    "full": AblationFlags(),
    "S": AblationFlags(disable_short=True),
    "L": AblationFlags(disable_long=True),
    "W": AblationFlags(unweighted_adjacency=True),
}


@dataclass
class AblationRow:
    variant: str
    report: EvalReport

    def csv(self) -> str:
        o = self.report.overall
        return f"{self.variant},{o.J_mean:.4f},{o.F_mean:.4f},{o.JF_mean:.4f}"


def score_predictions(
    heldout: Seq[Sequence], params: ModelParams, cfg: ModelConfig, flags: AblationFlags, tol: Optional[int]
) -> EvalReport:
    """In-memory equivalent of infer + eval: frame 1 excluded, same aggregation."""
    per_sequence = {}
    for seq in heldout:
        if too_short_to_score(seq.name, len(seq) - 1):
            continue
        prediction = predict_sequence(seq, params, cfg, flags)
        preds = list(prediction.masks[1:])
        gts = [seq.mask(t) for t in range(1, len(seq))]
        seq_tol = tol if tol is not None else davis_tolerance(seq.shape)
        per_sequence[seq.name] = score_sequence(preds, gts, seq_tol)
    return build_report(per_sequence)


def run_ablation(
    train_set: Seq[Sequence],
    heldout: Seq[Sequence],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    variants: Seq[str] = tuple(VARIANTS),
    tol: Optional[int] = 1,
) -> list[AblationRow]:
    rows = []
    for name in variants:
        flags = VARIANTS[name]
        params = Trainer(model_cfg, train_cfg, flags).fit(list(train_set))
        report = score_predictions(heldout, params, model_cfg, flags, tol)
        logger.info(f"variant {name}: J {report.overall.J_mean:.4f}, J&F {report.overall.JF_mean:.4f}")
        rows.append(AblationRow(variant=name, report=report))
    return rows
