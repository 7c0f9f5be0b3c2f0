"""Deterministic table and tree writers.

Floats are written with 17 significant digits so files round-trip exactly and
identical runs produce identical bytes.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return "%.17g" % x
    if x is None:
        return ""
    return str(x)


def header_lines(config: dict, extra: Iterable[str] = ()) -> list[str]:
    lines = [f"qtstomo {__version__}",
             "config " + json.dumps(config, sort_keys=True, separators=(",", ":"))]
    lines.extend(extra)
    return lines


def write_table(path: Path, header: Sequence[str], columns: Sequence[str], rows: Iterable[Sequence]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as f:
        for line in header:
            f.write(f"# {line}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(fmt(x) for x in row) + "\n")


def read_table(path: Path) -> tuple[list[str], list[str], list[list[str]]]:
    """Inverse of :func:`write_table`: (header lines, column names, rows as strings)."""
    header, rows, columns = [], [], None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            header.append(line[2:])
        elif columns is None:
            columns = line.split(",")
        else:
            rows.append(line.split(","))
    return header, columns or [], rows


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if math.isnan(x) else x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_tree(path: Path, header: Sequence[str], payload: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"header": list(header), **_jsonable(payload)}
    # json writes floats with repr, which round-trips exactly
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
