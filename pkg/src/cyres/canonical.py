"""Canonical JSON: sorted keys, no whitespace, floats as fixed 6 decimals.

Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
Output is stable across runs and platforms, and parsing it back then
re-serializing reproduces the same bytes.
"""

from __future__ import annotations

import json
import math
from typing import Any


def fmt_float(x: float) -> str:
    return f"{x:.6f}"


def _encode(obj: Any) -> str:
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return '"nan"'
        if math.isinf(obj):
            return '"inf"' if obj > 0 else '"-inf"'
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        return "{" + ",".join(json.dumps(str(k), ensure_ascii=False) + ":" + _encode(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot canonicalize {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    return _encode(obj)


def canonical_bytes(obj: Any) -> bytes:
    return _encode(obj).encode("utf-8")


def read_time(value: Any) -> float | None:
    """Inverse of the sentinel convention for times read back from JSON."""
    if value is None:
        return None
    if isinstance(value, str):
        if value in ("inf", "Infinity"):
            return math.inf
        raise ValueError(f"not a time value: {value!r}")
    return float(value)
