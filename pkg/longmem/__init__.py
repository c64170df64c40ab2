"""Long-term memory: masked pooling and the single-gate recurrent state."""

from .sgru import GapMode, GruParams, HiddenState, advance, init_state, masked_gap, sgru_step

__all__ = [
    "GapMode",
    "GruParams",
    "HiddenState",
    "advance",
    "init_state",
    "masked_gap",
    "sgru_step",
]
