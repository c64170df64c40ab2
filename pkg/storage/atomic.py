"""
All-or-Nothing Output
======================
Files are written to a temp file in the destination directory and moved into
place with os.replace. Output trees are built in a sibling temp directory and
renamed on success, so a failed command leaves no partial output behind.
"""

from __future__ import annotations

import contextlib
import logging
import os
import shutil
import tempfile
from pathlib import Path
from typing import Iterator, Union

from errors import DataIOError

logger = logging.getLogger("storage.atomic")

PathLike = Union[str, os.PathLike]


def write_bytes_atomic(path: PathLike, data: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as e:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise DataIOError(f"cannot write {path}: {e}") from e


def write_text_atomic(path: PathLike, text: str) -> None:
    write_bytes_atomic(path, text.encode("utf-8"))


@contextlib.contextmanager
def atomic_directory(path: PathLike) -> Iterator[Path]:
    """Yield a scratch directory that becomes `path` when the block succeeds.

    An existing empty `path` is replaced; a non-empty one is refused.
    """
    target = Path(path)
    if target.exists() and (not target.is_dir() or any(target.iterdir())):
        raise DataIOError(f"output {target} already exists and is not an empty directory")
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        scratch = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    except OSError as e:
        raise DataIOError(f"cannot create output directory next to {target}: {e}") from e

    try:
        yield scratch
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise

    try:
        if target.exists():
            target.rmdir()
        os.replace(scratch, target)
    except OSError as e:
        shutil.rmtree(scratch, ignore_errors=True)
        raise DataIOError(f"cannot move output into {target}: {e}") from e
    logger.debug(f"committed {target}")
