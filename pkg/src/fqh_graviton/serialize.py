"""CSV/JSON writers shared by the command-line front end.

All floating-point output is printed with 12 significant digits so that
re-runs and cross-implementation diffs are byte-stable; nothing here writes
timestamps.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """12-significant-digit text for floats; plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        return f"{float(x):.12g}"
    return str(x)


def round12(x):
    """Round floats (recursively) to 12 significant digits for JSON."""
    if isinstance(x, dict):
        return {k: round12(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [round12(v) for v in x]
    if isinstance(x, np.ndarray):
        return [round12(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return None
        return float(f"{float(x):.12g}")
    return x


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path: Path, obj) -> None:
    Path(path).write_text(json.dumps(round12(obj), indent=2, sort_keys=True) + "\n")


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    """(header, float matrix); non-numeric cells become NaN."""
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise ValueError(f"{path}: empty file")
    header = text[0].split(",")
    rows = []
    for line in text[1:]:
        cells = []
        for cell in line.split(","):
            try:
                cells.append(float(cell))
            except ValueError:
                cells.append(math.nan)
        rows.append(cells)
    return header, np.array(rows, dtype=float)


def read_csv_columns(path: Path, required: list[str]) -> dict[str, np.ndarray]:
    header, data = read_csv(path)
    missing = [c for c in required if c not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    return {c: data[:, header.index(c)] for c in header}
