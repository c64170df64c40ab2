"""
Checkpoint Format
==================
Little-endian binary, parameters in lexicographic name order:

  b"DTMN"                      magic
  u32 version                  currently 1
  repeated until end of file:
    u32 name_len, name (UTF-8)
    u32 rank, u32 dims[rank]
    f64 values[prod(dims)]     row-major

Saving is atomic; loading validates the magic, version and layout and
reports the byte offset of the first malformed field.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from errors import DataIOError, FormatError

from .atomic import PathLike, write_bytes_atomic

logger = logging.getLogger("storage.checkpoint")

MAGIC = b"DTMN"
VERSION = 1
_U32 = struct.Struct("<I")


def encode_checkpoint(params: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, _U32.pack(VERSION)]
    for name in sorted(params):
        value = np.asarray(params[name], dtype="<f8")
        raw_name = name.encode("utf-8")
        chunks.append(_U32.pack(len(raw_name)))
        chunks.append(raw_name)
        chunks.append(_U32.pack(value.ndim))
        chunks.extend(_U32.pack(dim) for dim in value.shape)
        chunks.append(np.ascontiguousarray(value).tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, count: int, what: str) -> bytes:
        if self.offset + count > len(self.data):
            raise FormatError(f"checkpoint truncated while reading {what}", offset=self.offset)
        chunk = self.data[self.offset : self.offset + count]
        self.offset += count
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    @property
    def done(self) -> bool:
        return self.offset == len(self.data)


def decode_checkpoint(data: bytes) -> dict[str, np.ndarray]:
    reader = _Reader(data)
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise FormatError("not a checkpoint (bad magic)", offset=0)
    version = reader.u32("version")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=len(MAGIC))

    params: dict[str, np.ndarray] = {}
    previous = None
    while not reader.done:
        start = reader.offset
        try:
            name = reader.take(reader.u32("name length"), "name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError("parameter name is not UTF-8", offset=start + 4) from e
        if previous is not None and name <= previous:
            raise FormatError(f"parameter {name!r} out of order or repeated", offset=start)
        rank = reader.u32(f"rank of {name}")
        dims = tuple(reader.u32(f"dims of {name}") for _ in range(rank))
        count = int(np.prod(dims, dtype=np.int64))
        raw = reader.take(8 * count, f"values of {name}")
        params[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims)
        previous = name
    return params


def save_checkpoint(path: PathLike, params: Mapping[str, np.ndarray]) -> None:
    write_bytes_atomic(path, encode_checkpoint(params))
    logger.info(f"saved {len(params)} parameters to {path}")


def load_checkpoint(path: PathLike) -> dict[str, np.ndarray]:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise DataIOError(f"cannot read checkpoint {path}: {e}") from e
    return decode_checkpoint(data)
