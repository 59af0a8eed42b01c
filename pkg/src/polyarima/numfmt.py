"""Stable numeric formatting for printed reports (10 significant digits)."""
from __future__ import annotations

import math
from typing import Any

import numpy as np

SIG_DIGITS = 10


def sig(x: float) -> float:
    """Round to 10 significant digits; regression outputs stay byte-stable."""
    if x is None or not math.isfinite(x):
        return x
    return float(f"{x:.{SIG_DIGITS}g}")


def fmt(x) -> str:
    """Render one numeric cell for CSV output."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    xf = float(x)
    if math.isnan(xf):
        return "nan"
    return f"{xf:.{SIG_DIGITS}g}"


def jsonable(obj: Any) -> Any:
    """Recursively convert to plain JSON types with rounded floats."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if math.isnan(v) else sig(v)
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    return obj
