#!/usr/bin/env python3
"""Render a quench trace: stacked Qtilde / phitilde panels with the fitted
two-branch solution overlaid, plus the spectral peak marker when a spectral
function file is supplied."""

from __future__ import annotations

import argparse
import sys

import numpy as np

import plotlib
from plotlib import plt


def fitted_curves(t: np.ndarray, A: float, E_g: float):
    Q = 2.0 * A * np.abs(np.sin(0.5 * E_g * t))
    phi_raw = 0.5 * np.pi - 0.5 * E_g * t
    branch = np.floor(E_g * t / (2.0 * np.pi) * 2.0)      # half-period index
    phi = (phi_raw + np.pi * branch) % (2.0 * np.pi)
    return Q, phi


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("trace", help="quench_trace.csv from the quench command")
    ap.add_argument("fit", help="bimetric_fit.json from the quench command")
    ap.add_argument("-o", "--output", default="quench.pdf")
    ap.add_argument("--no-fit-overlay", action="store_true",
                    help="suppress the fitted curves")
    ap.add_argument("--spectral", default=None,
                    help="optional spectral_function.csv for a third panel")
    args = ap.parse_args(argv)

    try:
        trace = plotlib.load_csv(args.trace, ["t", "Q_tilde", "phi_tilde"])
        fit = plotlib.load_json(args.fit, ["A", "E_g", "residual"])
        spectral = None
        if args.spectral:
            spectral = plotlib.load_csv(args.spectral, ["omega", "I"])
    except plotlib.SchemaError as err:
        plotlib.fail(str(err))

    with plt.rc_context(plotlib.STYLE):
        n_panels = 3 if spectral is not None else 2
        fig, axes = plt.subplots(n_panels, 1, figsize=(5.0, 2.2 * n_panels))
        t = trace["t"]
        axes[0].plot(t, trace["Q_tilde"], "o", ms=2.5, color="#1f77b4",
                     label="microscopic")
        axes[1].plot(t, trace["phi_tilde"], "o", ms=2.5, color="#1f77b4")
        overlay = not args.no_fit_overlay and fit.get("E_g") is not None \
            and not fit.get("degenerate", False)
        if overlay:
            tf = np.linspace(t[0], t[-1], 600)
            Qf, phif = fitted_curves(tf, fit["A"], fit["E_g"])
            label = f"fit: $E_g$ = {fit['E_g']:.3f}"
            axes[0].plot(tf, Qf, "-", color="#d62728", label=label)
            axes[1].plot(tf, phif, ".", ms=1.0, color="#d62728")
        axes[0].set_ylabel(r"$\widetilde{Q}$")
        axes[0].legend(loc="upper right")
        axes[1].set_ylabel(r"$\widetilde{\varphi}$")
        axes[1].set_xlabel(r"$t$  [$1/V_{1,0}$]")
        if spectral is not None:
            axes[2].plot(spectral["omega"], spectral["I"], "-", color="#2ca02c")
            peak = spectral["omega"][int(np.argmax(spectral["I"]))]
            axes[2].axvline(peak, color="#d62728", ls="--", lw=0.8,
                            label=f"peak at {peak:.3f}")
            axes[2].set_xlabel(r"$\omega$  [$V_{1,0}$]")
            axes[2].set_ylabel(r"$I(\omega)$")
            axes[2].legend(loc="upper right")
        fig.tight_layout()
        plotlib.save(fig, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
