"""Byte-stable JSON and CSV I/O.

Floats are always written with 17 significant digits, which round-trips
every double exactly, so identical results give identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

FLOAT_FMT = ".17g"


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, FLOAT_FMT)
    # keep a float visibly a float so readers do not turn it into an int
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj: Any, indent: int | None, level: int, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _encode(obj.tolist(), indent, level, out)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        pad, inner = _pads(indent, level)
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(inner)
            _encode(str(k), indent, level + 1, out)
            out.append(": ")
            _encode(v, indent, level + 1, out)
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        # flat numeric lists stay on one line; they are points and exponents
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj)
        pad, inner = _pads(None if flat else indent, level)
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", " if flat else ",")
            out.append(inner)
            _encode(v, indent, level + 1, out)
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _pads(indent, level):
    if indent is None:
        return "", ""
    return "\n" + " " * (indent * level), "\n" + " " * (indent * (level + 1))


def dumps(obj: Any, indent: int | None = 2) -> str:
    """Serialize ``obj`` to JSON text, floats at 17 significant digits."""
    out: list[str] = []
    _encode(obj, indent, 0, out)
    return "".join(out)


def content_hash(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


# -- sample sets -----------------------------------------------------------


def samples_to_csv(points, labels=None) -> str:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = [f"x{i + 1}" for i in range(n)]
    if labels is not None:
        header.append("label")
    w.writerow(header)
    for i, row in enumerate(points):
        cells = [format_float(v) for v in row]
        if labels is not None:
            cells.append(str(int(labels[i])))
        w.writerow(cells)
    return buf.getvalue()


def write_samples(path, points, labels=None) -> None:
    write_text(path, samples_to_csv(points, labels))


def read_samples(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a CSV written by :func:`write_samples`; returns ``(points, labels)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty sample file") from None
        header = [h.strip() for h in header]
        has_label = bool(header) and header[-1] == "label"
        xcols = header[:-1] if has_label else header
        if not xcols or any(h != f"x{i + 1}" for i, h in enumerate(xcols)):
            raise ValueError(f"{path}: header must be x1,...,xn[,label], got {header}")
        pts, labs = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            pts.append([float(v) for v in row[: len(xcols)]])
            if has_label:
                lab = int(float(row[-1]))
                if lab not in (-1, 1):
                    raise ValueError(f"{path}:{lineno}: label must be -1 or +1, got {row[-1]}")
                labs.append(lab)
    points = np.array(pts, dtype=float).reshape(-1, len(xcols))
    labels = np.array(labs, dtype=np.int8) if has_label else None
    return points, labels
