"""Time base, physical constants and unit-suffixed value parsing.

Simulation time is kept as integer picoseconds end to end; floats appear
only at the metrics boundary. Scenario files must spell out units on every
dimensioned quantity ("192us", "68m", "5dB") so that a bare number is a
parse error rather than a silent ns/us mixup.
"""

from __future__ import annotations

import re

SPEED_OF_LIGHT = 299_792_458.0  # m/s, radio waves in air
PS_PER_SECOND = 10**12

_DURATION_SCALES = {
    "ps": 1,
    "ns": 10**3,
    "us": 10**6,
    "µs": 10**6,
    "ms": 10**9,
    "s": 10**12,
}

_LENGTH_SCALES = {"mm": 1e-3, "cm": 1e-2, "m": 1.0, "km": 1e3}

_UNIT_RE = re.compile(r"^\s*([+-]?[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*([a-zA-Zµ%]+)\s*$")


class UnitError(ValueError):
    """A quantity string is missing its unit or carries an unknown one."""


def _split(text: str, kind: str) -> tuple[float, str]:
    if not isinstance(text, str):
        raise UnitError(f"{kind} must be a string with a unit suffix, got {text!r}")
    m = _UNIT_RE.match(text)
    if m is None:
        raise UnitError(f"cannot parse {kind} {text!r}: expected '<number><unit>'")
    return float(m.group(1)), m.group(2)


def parse_duration_ps(text: str) -> int:
    """Parse "42ns" / "192us" / "60s" into integer picoseconds."""
    value, unit = _split(text, "duration")
    try:
        scale = _DURATION_SCALES[unit]
    except KeyError:
        raise UnitError(f"unknown duration unit {unit!r} in {text!r}") from None
    return round(value * scale)


def parse_length_m(text: str) -> float:
    """Parse "68m" / "1.5km" into meters."""
    value, unit = _split(text, "length")
    try:
        scale = _LENGTH_SCALES[unit]
    except KeyError:
        raise UnitError(f"unknown length unit {unit!r} in {text!r}") from None
    return value * scale


def parse_decibel(text: str) -> float:
    """Parse "5dB" or "0dBm" into a plain dB number."""
    value, unit = _split(text, "power")
    if unit not in ("dB", "dBm"):
        raise UnitError(f"unknown power unit {unit!r} in {text!r}")
    return value


def parse_ppm(text: str) -> float:
    """Parse "10ppm" / "2500ppb" into parts per million."""
    value, unit = _split(text, "rate")
    if unit == "ppm":
        return value
    if unit == "ppb":
        return value * 1e-3
    raise UnitError(f"unknown rate unit {unit!r} in {text!r}")


def seconds(ps: float) -> float:
    return ps / PS_PER_SECOND


def ps_from_seconds(s: float) -> int:
    return round(s * PS_PER_SECOND)


def ns(ps: float) -> float:
    return ps / 1e3


def round_half_up(x: float) -> int:
    """Round with .5 going up; Python's round() is banker's rounding."""
    import math

    return math.floor(x + 0.5)
