"""Checkpoint files and all-or-nothing output writing."""

from .atomic import atomic_directory, write_bytes_atomic, write_text_atomic
from .checkpoint import (
    MAGIC,
    VERSION,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "MAGIC",
    "VERSION",
    "atomic_directory",
    "decode_checkpoint",
    "encode_checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "write_bytes_atomic",
    "write_text_atomic",
]
