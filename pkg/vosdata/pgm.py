"""
NetPBM P5 (Binary Greyscale) I/O
=================================
Header grammar: "P5", whitespace, width, whitespace, height, whitespace,
maxval, exactly one whitespace byte, then width·height raster bytes.
'#' starts a comment that runs to the end of the line (header only).

Only maxval 255 is accepted. Masks are stored as 0/255 and read back with
the threshold value ≥ 128 → 1.
"""

from __future__ import annotations

import numpy as np

from errors import DataIOError, FormatError, InputError
from storage.atomic import PathLike, write_bytes_atomic

MAGIC = b"P5"
MAXVAL = 255
MASK_THRESHOLD = 128
_WHITESPACE = b" \t\n\r\v\f"


def _skip_separators(data: bytes, pos: int) -> int:
    while pos < len(data):
        if data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        elif data[pos] in _WHITESPACE:
            pos += 1
        else:
            break
    return pos


def _read_int(data: bytes, pos: int, field: str) -> tuple[int, int]:
    start = _skip_separators(data, pos)
    end = start
    while end < len(data) and data[end : end + 1].isdigit():
        end += 1
    if end == start:
        raise FormatError(f"expected {field} in PGM header", offset=start)
    if end < len(data) and data[end] not in _WHITESPACE and data[end : end + 1] != b"#":
        raise FormatError(f"malformed {field} in PGM header", offset=end)
    return int(data[start:end]), end


def decode_pgm(data: bytes) -> np.ndarray:
    """Parse P5 bytes into an h×w uint8 array."""
    if data[:2] != MAGIC:
        raise FormatError(f"not a binary PGM: magic {data[:2]!r}, expected {MAGIC!r}", offset=0)
    width, pos = _read_int(data, 2, "width")
    height, pos = _read_int(data, pos, "height")
    maxval, pos = _read_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise FormatError(f"PGM dims {width}×{height} must be positive", offset=pos)
    if maxval != MAXVAL:
        raise FormatError(f"PGM maxval {maxval} unsupported, expected {MAXVAL}", offset=pos)
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FormatError("missing whitespace before PGM raster", offset=pos)
    pos += 1

    expected = width * height
    raster = data[pos:]
    if len(raster) < expected:
        raise FormatError(
            f"PGM raster truncated: {len(raster)} of {expected} bytes", offset=pos + len(raster)
        )
    if len(raster) > expected:
        raise FormatError("trailing bytes after PGM raster", offset=pos + expected)
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def encode_pgm(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.ndim != 2:
        raise InputError(f"PGM images are 2-d, got dims {image.shape}")
    if image.size and (image.min() < 0 or image.max() > MAXVAL):
        raise InputError("PGM pixel values must lie in [0, 255]")
    height, width = image.shape
    header = f"P5\n{width} {height}\n{MAXVAL}\n".encode("ascii")
    return header + image.astype(np.uint8).tobytes()


def mask_from_image(image: np.ndarray) -> np.ndarray:
    return (np.asarray(image) >= MASK_THRESHOLD).astype(np.uint8)


def read_pgm(path: PathLike) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e}") from e
    try:
        return decode_pgm(data)
    except FormatError as e:
        located = FormatError(f"{path}: {e}")
        located.offset = e.offset
        raise located from e


def write_pgm(path: PathLike, image: np.ndarray) -> None:
    write_bytes_atomic(path, encode_pgm(image))


def read_mask(path: PathLike) -> np.ndarray:
    return mask_from_image(read_pgm(path))


def write_mask(path: PathLike, mask: np.ndarray) -> None:
    write_pgm(path, np.where(np.asarray(mask) > 0, MAXVAL, 0).astype(np.uint8))
