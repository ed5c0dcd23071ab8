"""Small input-validation helpers shared across modules."""

from __future__ import annotations

import math
from typing import Sequence

from .errors import ConfigError


def check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    return value


def check_positive(name: str, value: float) -> float:
    value = check_finite(name, value)
    if value <= 0:
        raise ConfigError(f"{name} must be > 0, got {value!r}")
    return value


def check_nonnegative(name: str, value: float) -> float:
    value = check_finite(name, value)
    if value < 0:
        raise ConfigError(f"{name} must be >= 0, got {value!r}")
    return value


def check_fraction(name: str, value: float) -> float:
    """Validate a value in the closed interval [0, 1]."""
    value = check_finite(name, value)
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must be in [0, 1], got {value!r}")
    return value


def check_int(name: str, value: int, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value!r}")
    return value


def check_choice(name: str, value: str, choices: Sequence[str]) -> str:
    if value not in choices:
        raise ConfigError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value


def check_range_pair(name: str, pair: Sequence[float]) -> tuple[float, float]:
    """Validate a (lo, hi) pair with lo <= hi."""
    if len(pair) != 2:
        raise ConfigError(f"{name} must be a (lo, hi) pair, got {pair!r}")
    lo = check_finite(f"{name}[0]", pair[0])
    hi = check_finite(f"{name}[1]", pair[1])
    if lo > hi:
        raise ConfigError(f"{name} must satisfy lo <= hi, got {pair!r}")
    return lo, hi
