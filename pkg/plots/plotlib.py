"""Shared loading and style helpers for the figure scripts.

The scripts consume the simulation CLI's CSV/JSON outputs only through the
documented file schemas; schema violations abort with a nonzero exit, and
rendered files carry no timestamps so identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.dpi": 120,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "svg.hashsalt": "fqh-graviton",
}

SERIES_COLORS = {
    "exact": "#222222",
    "circuit": "#1f77b4",
    "noisy_postselected": "#d62728",
}


class SchemaError(RuntimeError):
    pass


def fail(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)
    sys.exit(2)


def load_csv(path: str, required: list[str]) -> dict[str, np.ndarray]:
    p = Path(path)
    if not p.is_file():
        raise SchemaError(f"{path}: no such file")
    lines = p.read_text().strip().splitlines()
    if len(lines) < 2:
        raise SchemaError(f"{path}: no data rows")
    header = lines[0].split(",")
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    columns: dict[str, list] = {c: [] for c in header}
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(header):
            raise SchemaError(f"{path}: ragged row {line!r}")
        for c, cell in zip(header, cells):
            columns[c].append(cell)
    out = {}
    for c, cells in columns.items():
        try:
            out[c] = np.array([float(x) for x in cells])
        except ValueError:
            out[c] = np.array(cells)
    return out


def load_json(path: str, required: list[str]) -> dict:
    p = Path(path)
    if not p.is_file():
        raise SchemaError(f"{path}: no such file")
    obj = json.loads(p.read_text())
    missing = [k for k in required if k not in obj]
    if missing:
        raise SchemaError(f"{path}: missing keys {missing}")
    return obj


def save(fig, out_path: str) -> None:
    """Vector output without creation timestamps."""
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix.lower() == ".svg":
        fig.savefig(out, metadata={"Date": None})
    elif out.suffix.lower() == ".pdf":
        fig.savefig(out, metadata={"CreationDate": None})
    else:
        fig.savefig(out)
    plt.close(fig)
