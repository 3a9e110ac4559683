"""Reproducibility helpers: tool version, canonical JSON and config hashes."""

from __future__ import annotations

import hashlib
import json
import math
from fractions import Fraction
from importlib import metadata
from typing import Any

import numpy as np

try:
    TOOL_VERSION = metadata.version("freewalk")
except metadata.PackageNotFoundError:  # running from a source tree
    TOOL_VERSION = "0.1.0"


def plain(obj: Any) -> Any:
    """Recursively convert to JSON-safe builtins; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def canonical_json(obj: Any, indent: int | None = None) -> str:
    """Sorted-key JSON with shortest round-trip float formatting."""
    seps = (",", ":") if indent is None else (",", ": ")
    return json.dumps(plain(obj), sort_keys=True, separators=seps, indent=indent, allow_nan=False)


def config_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]
