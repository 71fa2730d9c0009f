#!/usr/bin/env python3
"""Render the circuit-vs-exact observable comparison: root-state fidelity
over time, the orbital density profile at a chosen time, and the
density-density correlator row, one curve per pipeline."""

from __future__ import annotations

import argparse
import sys

import numpy as np

import plotlib
from plotlib import plt


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("observables", help="observables.csv from the trotter command")
    ap.add_argument("correlations", help="correlations.json from the trotter command")
    ap.add_argument("meta", help="run_meta.json from the trotter command")
    ap.add_argument("-o", "--output", default="observables.pdf")
    ap.add_argument("--density-time-index", type=int, default=-1,
                    help="time index for the density panel")
    ap.add_argument("--corr-row", type=int, default=0,
                    help="orbital i for the C_ij panel")
    args = ap.parse_args(argv)

    try:
        table = plotlib.load_csv(args.observables,
                                 ["t", "pipeline", "root_fidelity", "density_0"])
        corr = plotlib.load_json(args.correlations, [])
        meta = plotlib.load_json(args.meta, ["pipelines"])
    except plotlib.SchemaError as err:
        plotlib.fail(str(err))

    pipelines = list(meta["pipelines"])
    for want in ("exact", "circuit"):
        if want not in pipelines:
            plotlib.fail(f"metadata lists no {want!r} pipeline")
    if "noisy_postselected" not in pipelines:
        print("warning: no noisy pipeline in inputs; noisy curves omitted",
              file=sys.stderr)

    dens_cols = sorted((c for c in table if c.startswith("density_")),
                       key=lambda c: int(c.split("_")[1]))
    with plt.rc_context(plotlib.STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(10.5, 2.8))
        for pipe in pipelines:
            mask = table["pipeline"] == pipe
            if not np.any(mask):
                continue
            color = plotlib.SERIES_COLORS.get(pipe, None)
            t = table["t"][mask]
            order = np.argsort(t)
            axes[0].plot(t[order], table["root_fidelity"][mask][order],
                         "o-", ms=3, color=color, label=pipe)
            dens = np.array([table[c][mask][order] for c in dens_cols])
            axes[1].plot(np.arange(len(dens_cols)),
                         dens[:, args.density_time_index], "o-", ms=3,
                         color=color, label=pipe)
            times = sorted(corr.get(pipe, {}), key=float)
            if times:
                C = np.array(corr[pipe][times[args.density_time_index]])
                axes[2].plot(np.arange(C.shape[0]), C[args.corr_row], "o-",
                             ms=3, color=color, label=pipe)
        axes[0].set_xlabel(r"$t$  [$1/V_{1,0}$]")
        axes[0].set_ylabel("root fidelity")
        axes[0].legend()
        axes[1].set_xlabel("orbital $j$")
        axes[1].set_ylabel(r"$\langle n_j \rangle$")
        axes[2].set_xlabel("orbital $j$")
        axes[2].set_ylabel(rf"$C_{{{args.corr_row},j}}$")
        fig.tight_layout()
        plotlib.save(fig, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
