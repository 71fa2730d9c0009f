#!/usr/bin/env python3
"""Render optimal variational angles alpha*(t), beta*(t) for every system
size in a trajectory table, with the extrapolated infinite-size curve as a
solid black line and the cubic-vs-quadratic stability band on the beta
panel."""

from __future__ import annotations

import argparse
import sys

import numpy as np

import plotlib
from plotlib import plt


def _p0_series(extrap: dict, key: str) -> tuple[np.ndarray, np.ndarray]:
    fits = extrap["fits"]
    times = np.array(sorted(float(t) for t in fits))
    p0 = np.array([fits[t_key][key][0]
                   for t_key in sorted(fits, key=float)])
    return times, p0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("trajectory", help="trajectory.csv from the variational command")
    ap.add_argument("extrapolation", nargs="?", default=None,
                    help="extrapolation.json (omit to skip the black line)")
    ap.add_argument("--quadratic", default=None,
                    help="optional order-2 extrapolation.json for the band")
    ap.add_argument("-o", "--output", default="variational.pdf")
    args = ap.parse_args(argv)

    try:
        table = plotlib.load_csv(args.trajectory,
                                 ["N", "t", "alpha", "beta", "overlap"])
        extrap = quad = None
        if args.extrapolation:
            extrap = plotlib.load_json(args.extrapolation, ["order", "fits"])
        if args.quadratic:
            quad = plotlib.load_json(args.quadratic, ["order", "fits"])
    except plotlib.SchemaError as err:
        plotlib.fail(str(err))

    Ns = sorted(set(int(x) for x in table["N"]))
    if len(Ns) < 2 and extrap is not None:
        print("warning: single N in table; extrapolation line omitted",
              file=sys.stderr)
        extrap = None

    with plt.rc_context(plotlib.STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.0))
        cmap = plt.get_cmap("viridis")
        for i, N in enumerate(Ns):
            mask = table["N"] == N
            t = table["t"][mask]
            order = np.argsort(t)
            color = cmap(0.15 + 0.7 * i / max(1, len(Ns) - 1))
            axes[0].plot(t[order], table["alpha"][mask][order], "o-", ms=2.5,
                         color=color, label=f"N={N}")
            axes[1].plot(t[order], table["beta"][mask][order], "o-", ms=2.5,
                         color=color)
        if extrap is not None:
            ta, a0 = _p0_series(extrap, "alpha")
            tb, b0 = _p0_series(extrap, "beta")
            a0w, b0w = a0 % (2 * np.pi), b0 % (2 * np.pi)
            axes[0].plot(ta, a0w, "-", color="black", lw=2,
                         label=r"$N\to\infty$")
            axes[1].plot(tb, b0w, "-", color="black", lw=2)
            if quad is not None:
                _, b0q = _p0_series(quad, "beta")
                b0qw = b0q % (2 * np.pi)
                axes[1].fill_between(tb, np.minimum(b0w, b0qw),
                                     np.maximum(b0w, b0qw), color="black",
                                     alpha=0.25)
                scale = np.max(np.abs((b0w + np.pi) % (2 * np.pi) - np.pi))
                worst = float(np.max(np.abs(b0w - b0qw)) / scale) if scale else 0.0
                axes[1].set_title(
                    f"cubic vs quadratic band: {100 * worst:.2f}% of scale",
                    fontsize=8)
        axes[0].set_xlabel(r"$t$  [$1/V_{1,0}$]")
        axes[0].set_ylabel(r"$\alpha^{*}$")
        axes[0].legend(fontsize=7)
        axes[1].set_xlabel(r"$t$  [$1/V_{1,0}$]")
        axes[1].set_ylabel(r"$\beta^{*}$")
        fig.tight_layout()
        plotlib.save(fig, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
