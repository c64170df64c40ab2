"""
DTMNet Model — Parameters and Per-Frame Step
=============================================
Named parameter store plus `segment_step`, which runs one query frame
through the whole network:

  encode → node features → edge weights → normalize → gcf → classify (l_sem)
         → attention(X_t, h) → fuse(att, X^gcf, M_1, X_1) → decode (l_sup)
         → advance the long-term state with (X_t, mask_t)

Ablations (all default off):
  disable_short         raw X_t replaces X^gcf and l_sem ≡ 0
  disable_long          attention is all ones and the state is not advanced
  unweighted_adjacency  edge weights use W1 = W2 = I and W1/W2 stay frozen

Parameters (no biases anywhere):
  adjacency.W1, adjacency.W2   r×d
  gcn.head                     d×2
  gru.W                        d×2d
  encoder.stage{1,2,3}         3×3 conv kernels
  decoder.fuse, decoder.out    1×1 conv kernels
  decoder.up1, decoder.up2     3×3 conv kernels
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from errors import CheckpointMismatchError
from longmem import GapMode, GruParams, HiddenState, advance, init_state
from numerics.tensor import DiffGraph, Tensor
from stgraph import (
    AdjacencyParams,
    GcnHead,
    GraphConfig,
    build_graph,
    edge_weights,
    gcf,
    gcn_classify,
    loss_sem,
    node_features,
    normalize,
    query_features,
    rasterize_labels,
)

from .decoder import UP1_CHANNELS, UP2_CHANNELS, DecoderParams, attention, decode, fuse
from .encoder import OUTPUT_STRIDE, STAGE1_CHANNELS, STAGE2_CHANNELS, Encoded, EncoderParams, encode
from .losses import downsample_mask, loss_sup, predicted_mask

logger = logging.getLogger("segnet.model")

Params = Mapping[str, Tensor]


class AblationFlags(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    disable_short: bool = False
    disable_long: bool = False
    unweighted_adjacency: bool = False

    @property
    def variant(self) -> str:
        """Short label: full, S, L, W (joined with + when combined)."""
        tags = [
            tag
            for tag, on in (("S", self.disable_short), ("L", self.disable_long), ("W", self.unweighted_adjacency))
            if on
        ]
        return "+".join(tags) if tags else "full"


class ModelConfig(BaseModel):
    """Architecture hyperparameters; window geometry is a GraphConfig template."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    cin: int = Field(default=1, ge=1, description="Image channels")
    d: int = Field(default=32, ge=1, description="Feature channels")
    r: Optional[int] = Field(default=None, ge=1, description="Edge projection rank (defaults to d)")
    gap_mode: GapMode = "total"
    graph: GraphConfig = Field(default_factory=GraphConfig)
    encoder_widths: tuple[int, int] = Field(
        default=(STAGE1_CHANNELS, STAGE2_CHANNELS), description="Channels of encoder stages 1 and 2"
    )
    decoder_widths: tuple[int, int] = Field(
        default=(UP1_CHANNELS, UP2_CHANNELS), description="Channels of decoder up-stages 1 and 2"
    )

    @field_validator("encoder_widths", "decoder_widths")
    @classmethod
    def _positive_widths(cls, value: tuple[int, int]) -> tuple[int, int]:
        if min(value) < 1:
            raise ValueError(f"stage widths must be positive, got {value}")
        return value

    @property
    def rank(self) -> int:
        return self.r or self.d

    def graph_for(self, memory_frames: int, rows: int, cols: int) -> GraphConfig:
        return self.graph.model_copy(update={"k": memory_frames, "h": rows, "w": cols})


# ── Parameter store ─────────────────────────────────────────────────────


def parameter_spec(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Name → shape of every parameter, in lexicographic order."""
    d, r, cin = cfg.d, cfg.rank, cfg.cin
    e1, e2 = cfg.encoder_widths
    u1, u2 = cfg.decoder_widths
    spec = {
        "adjacency.W1": (r, d),
        "adjacency.W2": (r, d),
        "decoder.fuse": (1, 1, 2 * d + 2, d),
        "decoder.out": (1, 1, u2, 2),
        "decoder.up1": (3, 3, d + e2, u1),
        "decoder.up2": (3, 3, u1 + e1, u2),
        "encoder.stage1": (3, 3, cin, e1),
        "encoder.stage2": (3, 3, e1, e2),
        "encoder.stage3": (3, 3, e2, d),
        "gcn.head": (d, 2),
        "gru.W": (d, 2 * d),
    }
    return dict(sorted(spec.items()))


InitScheme = Literal["glorot", "he"]


def _fans(name: str, shape: tuple[int, ...]) -> tuple[int, int]:
    if len(shape) == 4:
        kh, kw, cin, cout = shape
        return kh * kw * cin, kh * kw * cout
    rows, cols = shape
    # the head multiplies from the right (X·head); the others act on column vectors
    return (rows, cols) if name == "gcn.head" else (cols, rows)


@dataclass
class ModelParams:
    """Plain float64 arrays keyed by parameter name.

    Lifecycle:
      params = ModelParams.initialize(cfg, seed)    # or storage.load_checkpoint
      tensors = params.bind(graph)                  # tracked leaves for one forward pass
      params = params.replace(updated)              # after an optimizer step
    """

    values: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def spec(cls, cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
        return parameter_spec(cfg)

    @classmethod
    def initialize(cls, cfg: ModelConfig, seed: int, scheme: InitScheme = "glorot") -> "ModelParams":
        """Uniform in [−s, s], drawn in name order.

        glorot: s = √(6/(fan_in + fan_out))
        he:     s = √(6/fan_in), which keeps ReLU activations at unit scale
        """
        rng = np.random.default_rng(seed)
        values = {}
        for name, shape in parameter_spec(cfg).items():
            fan_in, fan_out = _fans(name, shape)
            limit = np.sqrt(6.0 / fan_in) if scheme == "he" else np.sqrt(6.0 / (fan_in + fan_out))
            values[name] = rng.uniform(-limit, limit, size=shape)
        return cls(values=values)

    @property
    def names(self) -> list[str]:
        return sorted(self.values)

    def validate(self, cfg: ModelConfig) -> None:
        """Raise CheckpointMismatchError unless names and shapes match parameter_spec(cfg)."""
        expected = parameter_spec(cfg)
        if set(expected) != set(self.values):
            missing = sorted(set(expected) - set(self.values))
            extra = sorted(set(self.values) - set(expected))
            raise CheckpointMismatchError(f"parameter names differ: missing {missing}, unexpected {extra}")
        for name, shape in expected.items():
            if self.values[name].shape != shape:
                raise CheckpointMismatchError(
                    f"{name}: stored dims {self.values[name].shape}, model expects {shape}"
                )

    def bind(self, graph: DiffGraph) -> dict[str, Tensor]:
        return {name: graph.parameter(name, self.values[name]) for name in self.names}

    def constants(self) -> dict[str, Tensor]:
        return {name: Tensor(self.values[name]) for name in self.names}

    def replace(self, updated: Mapping[str, np.ndarray]) -> "ModelParams":
        return ModelParams(values={**self.values, **updated})


def frozen_names(flags: AblationFlags) -> set[str]:
    """Parameters the optimizer must leave untouched under `flags`."""
    frozen: set[str] = set()
    if flags.unweighted_adjacency or flags.disable_short:
        frozen |= {"adjacency.W1", "adjacency.W2"}
    if flags.disable_short:
        frozen.add("gcn.head")
    if flags.disable_long:
        frozen.add("gru.W")
    return frozen


def encoder_params(params: Params) -> EncoderParams:
    return EncoderParams(
        stage1=params["encoder.stage1"], stage2=params["encoder.stage2"], stage3=params["encoder.stage3"]
    )


def decoder_params(params: Params) -> DecoderParams:
    return DecoderParams(
        fuse=params["decoder.fuse"], up1=params["decoder.up1"], up2=params["decoder.up2"], out=params["decoder.out"]
    )


def gru_params(params: Params) -> GruParams:
    return GruParams(W=params["gru.W"])


# ── Forward step ────────────────────────────────────────────────────────


@dataclass
class FirstFrame:
    """Ground-truth first frame at feature resolution."""

    features: Tensor
    mask: np.ndarray


@dataclass
class StepResult:
    probs: Tensor                  # H×W×2
    mask: np.ndarray               # H×W uint8, argmax with ties to background
    l_sem: Tensor
    l_sup: Optional[Tensor]        # only when a ground-truth mask was given
    state: HiddenState
    node_probs: Optional[Tensor]   # GCN side prediction, inspection only


def prepare_first_frame(image: np.ndarray, mask: np.ndarray, params: Params) -> tuple[FirstFrame, Encoded]:
    encoded = encode(image, encoder_params(params))
    return FirstFrame(features=encoded.features, mask=downsample_mask(mask, OUTPUT_STRIDE)), encoded


def start_state(first: FirstFrame, cfg: ModelConfig) -> HiddenState:
    return init_state(first.features, first.mask, cfg.gap_mode)


def segment_step(
    frames: Sequence[Union[Encoded, np.ndarray]],
    memory_masks: Sequence[np.ndarray],
    state: HiddenState,
    first: FirstFrame,
    params: Params,
    cfg: ModelConfig,
    flags: AblationFlags = AblationFlags(),
    gt_mask: Optional[np.ndarray] = None,
) -> StepResult:
    """Segment the last of `frames`; the ones before it are short-term memory.

    `memory_masks` are image-resolution masks for the memory frames (ground
    truth in training, predictions at inference). With `gt_mask` the step
    also returns l_sup and advances the state from the ground truth;
    otherwise the state advances from the predicted mask.
    """
    enc_params = encoder_params(params)
    encoded = [f if isinstance(f, Encoded) else encode(f, enc_params) for f in frames]
    memory, query = encoded[:-1], encoded[-1]
    rows, cols, d = query.features.shape

    node_probs = None
    if flags.disable_short:
        refined = query.features
        semantic = Tensor(0.0)
    else:
        gcfg = cfg.graph_for(len(memory), rows, cols)
        graph = build_graph(gcfg)
        X = node_features([m.features for m in memory] + [query.features])
        if flags.unweighted_adjacency:
            adjacency = AdjacencyParams.identity(d)
        else:
            adjacency = AdjacencyParams(W1=params["adjacency.W1"], W2=params["adjacency.W2"])
        norm = normalize(graph, edge_weights(graph, X, adjacency))
        filtered = gcf(norm, X)
        node_probs = gcn_classify(filtered, GcnHead(params["gcn.head"]))
        labels = rasterize_labels([downsample_mask(m, OUTPUT_STRIDE) for m in memory_masks], gcfg)
        semantic = loss_sem(node_probs, labels)
        refined = query_features(filtered, gcfg)

    if flags.disable_long:
        att = Tensor(np.ones((rows, cols, 1)))
    else:
        att = attention(query.features, state.h)

    fused = fuse(refined, att, first.features, first.mask, params["decoder.fuse"])
    probs = decode(fused, query.skips, decoder_params(params))
    mask = predicted_mask(probs)

    supervised = loss_sup(probs, gt_mask) if gt_mask is not None else None

    new_state = state
    if not flags.disable_long:
        pooling = downsample_mask(gt_mask if gt_mask is not None else mask, OUTPUT_STRIDE)
        new_state = advance(state, query.features, pooling, gru_params(params), cfg.gap_mode)

    return StepResult(
        probs=probs, mask=mask, l_sem=semantic, l_sup=supervised, state=new_state, node_probs=node_probs
    )
