"""Configuration file, scale flag and environment parsing for saam-sr."""

from __future__ import annotations

import os
import re
from pathlib import Path

from .errors import ConfigError
from .saam_block import ScalePair
from .threads import THREADS_ENV

_SCALE_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(?:[xX]\s*(\d+(?:\.\d+)?))?\s*$")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}
# "#" opens a comment only at line start or after whitespace
_COMMENT_RE = re.compile(r"(?:^|\s)#.*$")


def load_config_file(path: Path) -> dict[str, str]:
    """Read ``key = value`` lines; blank lines and ``#`` comments are skipped.

    A ``#`` glued to other text (``runs/#3``) is part of the value.
    """
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}") from e

    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _COMMENT_RE.sub("", raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {lineno}: expected key=value, got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("config", f"line {lineno}: empty key")
        if key in values:
            raise ConfigError(key, f"duplicate key on line {lineno}")
        values[key] = value
    return values


def parse_scale(text: str) -> ScalePair:
    """``2`` -> (2, 2), ``2.5`` -> (2.5, 2.5), ``2x3`` -> (2, 3)."""
    match = _SCALE_RE.match(text)
    if match is None:
        raise ConfigError("scale", f"expected RV[xRH], got '{text}'")
    r_v = float(match.group(1))
    r_h = float(match.group(2)) if match.group(2) is not None else r_v
    return ScalePair(r_v, r_h)


def parse_scale_list(text: str) -> list[ScalePair]:
    """Comma-separated scales, e.g. ``2,3,4x3``."""
    items = [item for item in text.split(",") if item.strip()]
    if not items:
        raise ConfigError("scales", "at least one scale is required")
    return [parse_scale(item) for item in items]


def parse_bool(field: str, text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ConfigError(field, f"expected a boolean, got '{text}'")


def parse_int(field: str, text: str) -> int:
    try:
        return int(text)
    except ValueError as e:
        raise ConfigError(field, f"expected an integer, got '{text}'") from e


def parse_float(field: str, text: str) -> float:
    try:
        return float(text)
    except ValueError as e:
        raise ConfigError(field, f"expected a number, got '{text}'") from e


def get_thread_count() -> int:
    """Worker cap from ``SAAM_THREADS``; defaults to every core, 1 is deterministic.

    The same value caps the OpenMP/BLAS pools through ``threads.cap_native_threads``.
    """
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return os.cpu_count() or 1
    count = parse_int(THREADS_ENV, raw)
    if count < 1:
        raise ConfigError(THREADS_ENV, f"must be >= 1, got {count}")
    return count
