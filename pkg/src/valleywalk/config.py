"""Flat ``key = value`` configuration files and the global budget."""

from __future__ import annotations

import os
from pathlib import Path

from .errors import ArgumentError

DEFAULT_BUDGET = 50_000_000
BUDGET_ENV_VAR = "VALLEYWALK_BUDGET"


def budget() -> int:
    """Cap on window sizes and step counts, overridable via ``VALLEYWALK_BUDGET``."""
    raw = os.environ.get(BUDGET_ENV_VAR)
    if raw is None or not raw.strip():
        return DEFAULT_BUDGET
    try:
        value = int(float(raw))
    except ValueError:
        raise ArgumentError(f"{BUDGET_ENV_VAR}={raw!r} is not a number") from None
    if value <= 0:
        raise ArgumentError(f"{BUDGET_ENV_VAR} must be positive, got {value}")
    return value


def read_kv_file(path) -> dict[str, str]:
    """Parse a flat config file. Blank lines and ``#`` comments are skipped."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ArgumentError(f"{path}:{lineno}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        k = k.strip().lstrip("-").replace("-", "_")
        if not k:
            raise ArgumentError(f"{path}:{lineno}: empty key")
        out[k] = v.strip()
    return out
