"""Video data: PGM I/O, synthetic sequences, dataset folders, J/F metrics and reports."""

from .dataset import Sequence, frame_filename, list_sequences, load_dataset, load_sequence
from .evaluation import (
    CSV_HEADER,
    EvalReport,
    SequenceScores,
    build_report,
    evaluate,
    evaluate_async,
    score_sequence,
)
from .metrics import SequenceStats, boundary, boundary_f, davis_tolerance, jaccard, sequence_stats
from .pgm import decode_pgm, encode_pgm, read_mask, read_pgm, write_mask, write_pgm
from .synth import SynthConfig, SyntheticSequence, generate_sequence, occlusion_frames, synth_generate

__all__ = [
    "CSV_HEADER",
    "EvalReport",
    "Sequence",
    "SequenceScores",
    "SequenceStats",
    "SynthConfig",
    "SyntheticSequence",
    "boundary",
    "build_report",
    "boundary_f",
    "davis_tolerance",
    "decode_pgm",
    "encode_pgm",
    "evaluate",
    "evaluate_async",
    "frame_filename",
    "generate_sequence",
    "jaccard",
    "list_sequences",
    "load_dataset",
    "load_sequence",
    "occlusion_frames",
    "read_mask",
    "read_pgm",
    "score_sequence",
    "sequence_stats",
    "synth_generate",
    "write_mask",
    "write_pgm",
]
