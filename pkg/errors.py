"""
Error Types — Shared Exception Hierarchy
==========================================
Every module raises one of these so the CLI can map failures to exit codes
in a single place (cli.main).

Exit codes:
  1: check failure (gradcheck tolerance)
  2: configuration error
  3: I/O error (unreadable / unwritable / missing files, malformed files)
  4: numeric error (non-finite loss or forward value)
  5: checkpoint mismatch (names or dims differ from the model spec)

Each class also subclasses the closest builtin, so plain `except ValueError`
keeps working for callers that do not care about the distinction.
"""

from __future__ import annotations

from typing import Iterable, Optional


class DTMError(Exception):
    """Base class for all errors raised by this package."""

    exit_code: int = 1


# ── Programming / data errors ───────────────────────────────────────────


class ShapeError(DTMError, ValueError):
    """Operand dimensions do not agree."""

    exit_code = 2


class InputError(DTMError, ValueError):
    """An input value is outside the operation's domain."""

    exit_code = 2


class UsageError(DTMError, TypeError):
    """An API was called in a way it does not support."""

    exit_code = 2


class ConfigError(DTMError, ValueError):
    """A configuration value is missing, unknown or invalid."""

    exit_code = 2


class NumericError(DTMError, ArithmeticError):
    """A NaN or Inf showed up where a finite value is required."""

    exit_code = 4


class CheckFailure(DTMError):
    """A verification command ran fine but its tolerance was not met."""

    exit_code = 1


# ── I/O errors ──────────────────────────────────────────────────────────


class DataIOError(DTMError, OSError):
    """A file or directory could not be read or written."""

    exit_code = 3


class FormatError(DataIOError):
    """A file does not follow its format; `offset` is the byte where parsing stopped."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class MissingFilesError(DataIOError):
    """Expected files are absent; `missing` lists them in sorted order."""

    def __init__(self, missing: Iterable[str]):
        self.missing = sorted(missing)
        listing = "\n  ".join(self.missing)
        super().__init__(f"{len(self.missing)} missing file(s):\n  {listing}")


class CheckpointMismatchError(DTMError, ValueError):
    """A checkpoint loads but does not fit the configured model."""

    exit_code = 5
