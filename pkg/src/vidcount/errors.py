"""Exception hierarchy and process exit codes."""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_CONFIG = 4
EXIT_STAGE = 5
EXIT_FAILURE = 6


class VidcountError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(VidcountError):
    """A line of an interchange file could not be parsed.

    Carries the 1-based line number when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(VidcountError):
    """A record violates a format-level invariant (bad RLE, bad field value)."""


class ConfigError(VidcountError):
    """A configuration value is out of range, unknown, or inconsistent."""


class ShapeError(VidcountError):
    """Two grids or arrays that must agree in shape do not."""


class UndefinedOverlapError(VidcountError):
    """Overlap is undefined, e.g. IoU of two zero-area boxes."""


class StageError(VidcountError):
    """A pipeline stage failed (detector, segmenter, or tracker fault)."""


class EvalError(VidcountError):
    """Evaluation inputs are unusable (empty, misaligned, or inconsistent)."""


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code contract."""
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, StageError):
        return EXIT_STAGE
    if isinstance(exc, VidcountError):
        return EXIT_FAILURE
    return 1
