"""
Run Configuration — `key = value` Files
========================================
One flat pydantic model holds every tunable of the pipeline. Config files are
UTF-8 text, one `key = value` per line, `#` starts a comment. Values are
coerced by pydantic; unknown keys are rejected. CLI flags override file
values.

Groups (all keys documented with defaults in configs/default.conf):
  graph     k, ws, hs, wt, ht, temporal_mode
  model     d, r, gap_mode
  train     lam, lr, lr_decay, weight_decay, clip_length, epochs, batch_videos
  synth     sequences, frames, width, height, shapes, speed_min, speed_max,
            drift, occluder_rate, occlusion_length
  ablation  disable_short, disable_long, unweighted_adjacency
  eval      tol (pixels, or "davis")
  paths     data, heldout
  seed

Usage:
  cfg = load_config("configs/toy.conf", {"epochs": 3})
  trainer = Trainer(cfg.network_config(), cfg.train_config(), cfg.ablation_flags())
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Literal, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from errors import ConfigError, DataIOError
from longmem import GapMode
from segnet import AblationFlags, ModelConfig
from stgraph import GraphConfig
from stgraph.graph import TemporalMode
from vosdata.synth import ShapeKind, SynthConfig
from workers.trainer import TrainConfig

logger = logging.getLogger("cli.config")

COMMENT = "#"


class Config(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    # ── Graph ────────────────────────────────────────
    k: int = Field(default=2, ge=0, description="Short-term memory frames")
    ws: int = Field(default=3, ge=1, description="Spatial window width")
    hs: int = Field(default=3, ge=1, description="Spatial window height")
    wt: int = Field(default=3, ge=1, description="Temporal window width")
    ht: int = Field(default=3, ge=1, description="Temporal window height")
    temporal_mode: TemporalMode = "bidirectional"

    # ── Model ────────────────────────────────────────
    d: int = Field(default=32, ge=1, description="Feature channels")
    r: Optional[int] = Field(default=None, ge=1, description="Edge projection rank (defaults to d)")
    gap_mode: GapMode = "total"

    # ── Training ─────────────────────────────────────
    lam: float = Field(default=1.0, gt=0.0, description="Weight of the supervised loss")
    lr: float = Field(default=1e-4, gt=0.0)
    lr_decay: float = Field(default=0.95, gt=0.0, le=1.0)
    weight_decay: float = Field(default=1e-5, ge=0.0)
    clip_length: int = Field(default=5, ge=2)
    epochs: int = Field(default=10, ge=0)
    batch_videos: int = Field(default=1, ge=1)

    # ── Synthetic data ───────────────────────────────
    sequences: int = Field(default=20, ge=1)
    frames: int = Field(default=24, ge=1)
    width: int = Field(default=64, ge=16)
    height: int = Field(default=64, ge=16)
    shapes: tuple[ShapeKind, ...] = ("disk", "rectangle")
    speed_min: float = Field(default=1.0, ge=0.0)
    speed_max: float = Field(default=3.0, ge=0.0)
    drift: float = Field(default=0.01, ge=0.0)
    occluder_rate: float = Field(default=0.0, ge=0.0, le=1.0)
    occlusion_length: int = Field(default=3, ge=1)

    # ── Ablation ─────────────────────────────────────
    disable_short: bool = False
    disable_long: bool = False
    unweighted_adjacency: bool = False

    # ── Evaluation / paths ───────────────────────────
    tol: Union[int, Literal["davis"]] = 1
    data: Optional[Path] = None
    heldout: Optional[Path] = None

    seed: int = 0

    @field_validator("ws", "hs", "wt", "ht")
    @classmethod
    def window_must_be_odd(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"window extents must be odd, got {v}")
        return v

    @field_validator("width", "height")
    @classmethod
    def must_divide_by_four(cls, v: int) -> int:
        if v % 4:
            raise ValueError(f"image size must be divisible by 4, got {v}")
        return v

    @field_validator("shapes", mode="before")
    @classmethod
    def split_shape_list(cls, v: Any) -> Any:
        if isinstance(v, str):
            return tuple(part.strip() for part in v.split(",") if part.strip())
        return v

    @field_validator("r", mode="before")
    @classmethod
    def blank_rank_means_default(cls, v: Any) -> Any:
        if isinstance(v, str) and v.strip().lower() in ("", "none"):
            return None
        return v

    @field_validator("tol")
    @classmethod
    def tol_must_be_non_negative(cls, v: Union[int, str]) -> Union[int, str]:
        if isinstance(v, int) and v < 0:
            raise ValueError(f"boundary tolerance must be >= 0, got {v}")
        return v

    @model_validator(mode="after")
    def speed_range_must_be_ordered(self) -> "Config":
        if self.speed_min > self.speed_max:
            raise ValueError(f"speed_min {self.speed_min} exceeds speed_max {self.speed_max}")
        return self

    # ── Derived configs ──────────────────────────────

    def graph_config(self) -> GraphConfig:
        return GraphConfig(
            k=self.k, ws=self.ws, hs=self.hs, wt=self.wt, ht=self.ht, temporal_mode=self.temporal_mode
        )

    def network_config(self) -> ModelConfig:
        return ModelConfig(d=self.d, r=self.r, gap_mode=self.gap_mode, graph=self.graph_config())

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lam=self.lam,
            lr=self.lr,
            lr_decay=self.lr_decay,
            weight_decay=self.weight_decay,
            clip_length=self.clip_length,
            epochs=self.epochs,
            batch_videos=self.batch_videos,
            seed=self.seed,
        )

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            sequences=self.sequences,
            frames=self.frames,
            width=self.width,
            height=self.height,
            shapes=self.shapes,
            speed_min=self.speed_min,
            speed_max=self.speed_max,
            drift=self.drift,
            occluder_rate=self.occluder_rate,
            occlusion_length=self.occlusion_length,
            seed=self.seed,
        )

    def ablation_flags(self) -> AblationFlags:
        return AblationFlags(
            disable_short=self.disable_short,
            disable_long=self.disable_long,
            unweighted_adjacency=self.unweighted_adjacency,
        )

    @property
    def boundary_tolerance(self) -> Optional[int]:
        """Pixels, or None for the DAVIS diagonal rule."""
        return None if self.tol == "davis" else int(self.tol)


# ── Parsing ─────────────────────────────────────────────────────────────


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw `key = value` pairs; duplicate keys and lines without '=' are errors."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(COMMENT, 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def _describe(exc: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in err['loc']) or 'config'}: {err['msg']}" for err in exc.errors()
    )


def build_config(values: Mapping[str, Any]) -> Config:
    unknown = sorted(set(values) - set(Config.model_fields))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    try:
        return Config.model_validate(dict(values))
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {_describe(exc)}") from exc


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None) -> Config:
    """File values (if any) overlaid with non-None overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"{path}: not valid UTF-8") from exc
        except OSError as exc:
            raise DataIOError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        values.update(parse_config_text(text, str(path)))
        logger.debug(f"loaded {len(values)} key(s) from {path}")
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return build_config(values)
