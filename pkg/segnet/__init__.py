"""Segmentation network: toy encoder, attention, fusion, decoder, losses, model step."""

from .decoder import DecoderParams, attention, decode, fuse
from .encoder import Encoded, EncoderParams, Skips, encode
from .losses import downsample_mask, loss_sup, predicted_mask, total_loss
from .model import (
    AblationFlags,
    FirstFrame,
    ModelConfig,
    ModelParams,
    StepResult,
    frozen_names,
    parameter_spec,
    prepare_first_frame,
    segment_step,
    start_state,
)

__all__ = [
    "AblationFlags",
    "DecoderParams",
    "Encoded",
    "EncoderParams",
    "FirstFrame",
    "ModelConfig",
    "ModelParams",
    "Skips",
    "StepResult",
    "attention",
    "decode",
    "downsample_mask",
    "encode",
    "frozen_names",
    "fuse",
    "loss_sup",
    "parameter_spec",
    "predicted_mask",
    "prepare_first_frame",
    "segment_step",
    "start_state",
    "total_loss",
]
