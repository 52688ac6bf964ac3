"""Deterministic JSON/CSV emission: sorted keys, 17-significant-digit reals.

``json.dumps`` leaves float formatting to ``repr``; the artifact schemas pin
17 significant digits instead, so we emit JSON with a tiny recursive writer.
Output is plain JSON parseable by ``json.loads``.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np


def format_real(x: float) -> str:
    if isinstance(x, (np.floating,)):
        x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"non-finite real {x!r} cannot be serialized")
    s = f"{x:.17g}"
    # keep integral floats recognizable as reals
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _emit(obj: Any, parts: list) -> None:
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(format_real(obj))
    elif isinstance(obj, str):
        parts.append('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), parts)
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(obj):
            if i:
                parts.append(", ")
            _emit(item, parts)
        parts.append("]")
    elif isinstance(obj, dict):
        parts.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                parts.append(", ")
            _emit(str(key), parts)
            parts.append(": ")
            _emit(obj[key], parts)
        parts.append("}")
    else:
        raise TypeError(f"cannot serialize {type(obj)}")


def dumps(obj: Any) -> str:
    parts: list = []
    _emit(obj, parts)
    return "".join(parts)


def dump_file(obj: Any, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def write_csv(path, header: list[str], rows) -> None:
    """Write rows of mixed ints/reals/strings with %.17g real formatting."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for cell in row:
                if isinstance(cell, (bool,)):
                    cells.append(str(int(cell)))
                elif isinstance(cell, (int, np.integer)):
                    cells.append(str(int(cell)))
                elif isinstance(cell, (float, np.floating)):
                    cells.append(format_real(float(cell)))
                else:
                    cells.append(str(cell))
            fh.write(",".join(cells) + "\n")
