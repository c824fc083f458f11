"""Plain-text output: a minimal TOML writer with full-precision floats."""

from __future__ import annotations

import math

import numpy as np


def fmt_float(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    s = "%.17g" % v
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_value(e) for e in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dump_toml(doc: dict) -> str:
    """Serialize a dict of scalars and one level of sub-tables.

    ``None`` values are omitted; key order is preserved.
    """
    lines = []
    tables = []
    for key, val in doc.items():
        if val is None:
            continue
        if isinstance(val, dict):
            tables.append((key, val))
        else:
            lines.append(f"{key} = {_value(val)}")
    for name, table in tables:
        if lines:
            lines.append("")
        lines.append(f"[{name}]")
        for key, val in table.items():
            if val is not None:
                lines.append(f"{key} = {_value(val)}")
    return "\n".join(lines) + "\n"
