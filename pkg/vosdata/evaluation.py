"""
Prediction Evaluation — J / F / J&F Report
============================================
Compares a prediction tree against a ground-truth tree (same layout as the
dataset: <root>/<seq>/masks/%05d.pgm; predictions may also sit directly in
<root>/<seq>/%05d.pgm). Frame 1 is excluded because its mask is given.

Pipeline:
  1. list ground-truth sequences, skip those with fewer than 4 scored frames
     (warning), check every prediction exists (else list the gaps)
  2. read prediction + ground-truth PGMs concurrently (aiofiles, asyncio.gather)
  3. score each sequence in a worker thread
  4. merge rows in lexicographic sequence order, append the GLOBAL row

CSV:
  sequence,J_mean,J_recall,J_decay,F_mean,F_recall,F_decay,JF_mean
  one row per sequence, then GLOBAL (column-wise mean of the sequence rows),
  every value with 4 decimals
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import astuple, dataclass
from pathlib import Path
from typing import Optional

import aiofiles
import numpy as np

from errors import DataIOError, FormatError, MissingFilesError
from storage.atomic import PathLike

from .dataset import FRAMES_DIR, MASKS_DIR, frame_filename, list_sequences
from .metrics import MIN_SCORED_FRAMES, boundary_f, davis_tolerance, jaccard, sequence_stats
from .pgm import decode_pgm, mask_from_image

logger = logging.getLogger("vosdata.evaluation")

CSV_HEADER = "sequence,J_mean,J_recall,J_decay,F_mean,F_recall,F_decay,JF_mean"
GLOBAL_ROW = "GLOBAL"


@dataclass(frozen=True)
class SequenceScores:
    J_mean: float
    J_recall: float
    J_decay: float
    F_mean: float
    F_recall: float
    F_decay: float
    JF_mean: float


@dataclass
class EvalReport:
    sequences: dict[str, SequenceScores]
    overall: SequenceScores

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for name in sorted(self.sequences):
            lines.append(_csv_row(name, self.sequences[name]))
        lines.append(_csv_row(GLOBAL_ROW, self.overall))
        return "\n".join(lines) + "\n"

    def global_row(self) -> str:
        return _csv_row(GLOBAL_ROW, self.overall)


def _fmt(value: float) -> str:
    text = f"{value:.4f}"
    return "0.0000" if text == "-0.0000" else text


def _csv_row(name: str, scores: SequenceScores) -> str:
    return ",".join([name, *(_fmt(v) for v in astuple(scores))])


def score_sequence(preds: list[np.ndarray], gts: list[np.ndarray], tol: int) -> SequenceScores:
    """Scores for one sequence from its evaluated frames (frame 1 already dropped)."""
    j = sequence_stats([jaccard(p, g) for p, g in zip(preds, gts)])
    f = sequence_stats([boundary_f(p, g, tol) for p, g in zip(preds, gts)])
    return SequenceScores(
        J_mean=j.mean,
        J_recall=j.recall,
        J_decay=j.decay,
        F_mean=f.mean,
        F_recall=f.recall,
        F_decay=f.decay,
        JF_mean=(j.mean + f.mean) / 2.0,
    )


def build_report(per_sequence: dict[str, SequenceScores]) -> EvalReport:
    """Order rows by sequence name and average each column into the GLOBAL row."""
    if not per_sequence:
        raise DataIOError("no sequence had enough scored frames to report")
    ordered = dict(sorted(per_sequence.items()))
    columns = np.array([astuple(s) for s in ordered.values()], dtype=np.float64)
    overall = SequenceScores(*(float(v) for v in columns.mean(axis=0)))
    return EvalReport(sequences=ordered, overall=overall)


def too_short_to_score(seq: str, scored: int) -> bool:
    """True (with a warning) when `scored` frames cannot fill the four decay quartiles."""
    if scored >= MIN_SCORED_FRAMES:
        return False
    logger.warning(f"{seq}: {scored} scored frames, {MIN_SCORED_FRAMES} needed; sequence skipped")
    return True


def _prediction_path(pred_root: Path, seq: str, name: str) -> Path:
    nested = pred_root / seq / MASKS_DIR / name
    return nested if nested.is_file() else pred_root / seq / name


def _gt_frame_names(gt_root: Path, seq: str) -> list[str]:
    count = len(list((gt_root / seq / FRAMES_DIR).glob("*.pgm")))
    return [frame_filename(t) for t in range(2, count + 1)]


async def _read_mask_async(path: Path) -> np.ndarray:
    try:
        async with aiofiles.open(path, "rb") as fh:
            data = await fh.read()
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e}") from e
    try:
        return mask_from_image(decode_pgm(data))
    except FormatError as e:
        located = FormatError(f"{path}: {e}")
        located.offset = e.offset
        raise located from e


async def _evaluate_sequence(
    pred_root: Path, gt_root: Path, seq: str, names: list[str], tol: Optional[int]
) -> tuple[str, SequenceScores]:
    preds = await asyncio.gather(*(_read_mask_async(_prediction_path(pred_root, seq, n)) for n in names))
    gts = await asyncio.gather(*(_read_mask_async(gt_root / seq / MASKS_DIR / n) for n in names))
    for name, p, g in zip(names, preds, gts):
        if p.shape != g.shape:
            raise DataIOError(f"{seq}/{name}: prediction {p.shape} vs ground truth {g.shape}")
    seq_tol = tol if tol is not None else davis_tolerance(gts[0].shape)
    scores = await asyncio.to_thread(score_sequence, list(preds), list(gts), seq_tol)
    logger.debug(f"{seq}: J&F {scores.JF_mean:.4f} (tol {seq_tol})")
    return seq, scores


async def evaluate_async(pred_dir: PathLike, gt_dir: PathLike, tol: Optional[int] = 1) -> EvalReport:
    """Evaluate every ground-truth sequence; `tol=None` uses the DAVIS tolerance."""
    pred_root, gt_root = Path(pred_dir), Path(gt_dir)
    sequences = list_sequences(gt_root)
    if not sequences:
        raise DataIOError(f"no ground-truth sequences under {gt_root}")

    plan: dict[str, list[str]] = {}
    missing: list[str] = []
    for seq in sequences:
        names = _gt_frame_names(gt_root, seq)
        if too_short_to_score(seq, len(names)):
            continue
        for name in names:
            if not (gt_root / seq / MASKS_DIR / name).is_file():
                missing.append(str(gt_root / seq / MASKS_DIR / name))
            if not _prediction_path(pred_root, seq, name).is_file():
                missing.append(str(pred_root / seq / name))
        plan[seq] = names
    if missing:
        raise MissingFilesError(missing)

    results = await asyncio.gather(
        *(_evaluate_sequence(pred_root, gt_root, seq, names, tol) for seq, names in plan.items())
    )
    report = build_report(dict(results))
    logger.info(f"evaluated {len(report.sequences)} sequences: J&F {report.overall.JF_mean:.4f}")
    return report


def evaluate(pred_dir: PathLike, gt_dir: PathLike, tol: Optional[int] = 1) -> EvalReport:
    return asyncio.run(evaluate_async(pred_dir, gt_dir, tol))
