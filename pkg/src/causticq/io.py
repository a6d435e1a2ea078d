"""Deterministic CSV/JSON writers (17 significant digits, round-trip exact)."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def write_csv(path, header, columns):
    """Write equal-length columns with a one-line header."""
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns must have equal length")
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(fmt(c[i]) if np.issubdtype(c.dtype, np.floating) else str(c[i])
                              for c in cols))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """Return (header, float array) for a file written by :func:`write_csv`."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]) if len(lines) > 1 \
        else np.empty((0, len(header)))
    return header, data


def _encode(obj):
    if isinstance(obj, float):
        return _Float(obj)
    if isinstance(obj, (np.floating,)):
        return _Float(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_encode(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    return obj


class _Float(float):
    def __repr__(self):
        if math.isnan(self) or math.isinf(self):
            return "null"
        return fmt(self)


def _iterencode(o, indent, level=0):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = "," if indent is not None else ", "
    if isinstance(o, _Float):
        yield repr(o)
    elif isinstance(o, dict):
        if not o:
            yield "{}"
            return
        yield "{"
        for i, (k, v) in enumerate(o.items()):
            yield (sep if i else "") + pad + json.dumps(k) + ": "
            yield from _iterencode(v, indent, level + 1)
        yield end + "}"
    elif isinstance(o, list):
        if not o:
            yield "[]"
            return
        yield "["
        for i, v in enumerate(o):
            yield (sep if i else "") + pad
            yield from _iterencode(v, indent, level + 1)
        yield end + "]"
    else:
        yield json.dumps(o)


def dumps(obj, indent=2) -> str:
    return "".join(_iterencode(_encode(obj), indent))


def write_json(path, obj):
    Path(path).write_text(dumps(obj) + "\n")
