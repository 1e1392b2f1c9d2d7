"""Plain-text ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored. Values are kept as strings and
converted by the consumer; list values are comma or whitespace separated.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from tiltlink.errors import ScenarioConfigError


def parse_kv(text: str, source: str = "<string>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ScenarioConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def load_kv(path: str | Path) -> dict[str, str]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_kv(text, str(p))


def as_float(d: dict[str, str], key: str, default: float) -> float:
    if key not in d:
        return default
    try:
        return float(d[key])
    except ValueError as exc:
        raise ScenarioConfigError(f"{key}: not a number: {d[key]!r}") from exc


def as_floats(d: dict[str, str], key: str, default, size: int | None = None) -> np.ndarray:
    if key not in d:
        return np.asarray(default, dtype=float)
    try:
        vals = np.array([float(t) for t in d[key].replace(",", " ").split()])
    except ValueError as exc:
        raise ScenarioConfigError(f"{key}: bad number list {d[key]!r}") from exc
    if size is not None and vals.size != size:
        raise ScenarioConfigError(f"{key}: expected {size} values, got {vals.size}")
    return vals


def check_known(d: dict[str, str], known, source: str) -> None:
    unknown = sorted(set(d) - set(known))
    if unknown:
        raise ScenarioConfigError(f"{source}: unknown keys {unknown}")
