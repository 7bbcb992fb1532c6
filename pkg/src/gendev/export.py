"""Text exports: JSON with 17-digit floats, OBJ meshes and point CSV."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .curves import format_float

__all__ = ["dumps", "write_text", "obj_text", "points_csv_text"]


def _encode(value, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return "null"
        return format_float(value)
    if isinstance(value, str):
        import json
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{_encode(str(k), indent, level + 1)}: {_encode(v, indent, level + 1)}"
                 for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        seq = list(value)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(value).__name__}")


def dumps(data, indent: int = 2) -> str:
    """JSON text; floats carry 17 significant digits, non-finite become null."""
    return _encode(data, indent, 0) + "\n"


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def obj_text(points: np.ndarray, valid: np.ndarray, faces: Sequence[Sequence[int]]) -> str:
    """OBJ with vertices ``v x y z`` and 1-based quads; invalid vertices are
    dropped and faces touching them are skipped."""
    points = np.asarray(points, dtype=float)
    index = np.full(len(points), -1)
    lines = []
    count = 0
    for i, (p, ok) in enumerate(zip(points, valid)):
        if ok:
            index[i] = count
            count += 1
            lines.append("v " + " ".join(format_float(c) for c in p))
    for face in faces:
        ids = index[list(face)]
        if np.all(ids >= 0):
            lines.append("f " + " ".join(str(int(j) + 1) for j in ids))
    return "\n".join(lines) + "\n"


def points_csv_text(base: np.ndarray, points: np.ndarray, valid: np.ndarray) -> str:
    base = np.asarray(base, dtype=float)
    points = np.asarray(points, dtype=float)
    header = ([f"x{i}" for i in range(1, base.shape[1] + 1)]
              + [f"y{i}" for i in range(1, points.shape[1] + 1)] + ["valid"])
    lines = [",".join(header)]
    for b, p, ok in zip(base, points, valid):
        vals = [format_float(v) for v in b] + [format_float(v) if ok else "nan" for v in p]
        lines.append(",".join(vals + ["1" if ok else "0"]))
    return "\n".join(lines) + "\n"
