"""Command-line front end.

Subcommands: quench, spectrum, variational, extrapolate, trotter, compare,
bimetric-fit.  Time series go to CSV, scalars and fits to JSON, and every
run writes a run_meta.json echoing the effective configuration, so a run is
reproducible from its output directory alone.  Exit codes: 0 success, 2
usage/validation error, 1 computation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import CylinderGeometry, enumerate_squeezed, post_select_counts
from .circuits import (
    Circuit,
    NoiseModel,
    build_trotter_circuit,
    build_variational_circuit,
    cnot_count,
    estimate_observables_from_counts,
    sample,
)
from .dynamics import (
    compare_full_truncated,
    evolve_grid,
    graviton_energy,
    observables,
    run_quench,
    spectral_function,
)
from .geometry import (
    IDENTITY_METRIC,
    MetricParams,
    MetricTrace,
    fit_bimetric,
    metric_from_params,
)
from .hamiltonian import (
    build_truncated_fock,
    build_truncated_hamiltonian,
    ground_state_closed_form,
    vkm,
)
from .serialize import fmt, read_csv_columns, round12, write_csv, write_json
from .variational import extrapolate, ground_state_prep_params, optimal_trajectory


class UsageError(ValueError):
    """Invalid configuration detected before any computation."""


def _positive(name: str, value, strict: bool = True) -> None:
    if value is None:
        return
    if strict and value <= 0 or not strict and value < 0:
        raise UsageError(f"{name} must be {'positive' if strict else 'non-negative'}")


def _validate(cfg: dict) -> None:
    if "n" in cfg and cfg["n"] is not None and cfg["n"] < 2:
        raise UsageError("--n must be at least 2")
    for key, strict in (("l2", True), ("dt", True), ("tmax", True),
                        ("eta", True), ("k", True), ("shots", True),
                        ("threads", True)):
        if key in cfg:
            _positive(f"--{key}", cfg[key], strict)
    for key in ("noise_p1", "noise_p2", "readout"):
        if cfg.get(key) is not None and not 0.0 <= cfg[key] <= 1.0:
            raise UsageError(f"--{key.replace('_', '-')} must lie in [0, 1]")


def _t_grid(cfg: dict) -> np.ndarray:
    return np.arange(0.0, cfg["tmax"] + 1e-9, cfg["dt"])


def _out_dir(cfg: dict, command: str) -> Path:
    out = Path(cfg.get("out") or f"out_{command.replace('-', '_')}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(out: Path, command: str, cfg: dict, extra: dict | None = None) -> None:
    meta = {
        "command": command,
        "package": "fqh-graviton",
        "version": __version__,
        "config": {k: round12(v) for k, v in sorted(cfg.items())},
    }
    if extra:
        meta.update(round12(extra))
    write_json(out / "run_meta.json", meta)


def _fit_payload(fit) -> dict:
    return {
        "A": fit.A,
        "E_g": fit.E_g,
        "residual": fit.residual,
        "E_g_phi_slope": fit.E_g_phi,
        "degenerate": fit.degenerate,
        "degenerate_reason": fit.reason,
        "converged": fit.converged,
    }


# ---------------------------------------------------------------------------
# Commands


def cmd_quench(cfg: dict) -> int:
    out = _out_dir(cfg, "quench")
    geom = CylinderGeometry(cfg["n"], cfg["l2"])
    trace = run_quench(geom, cfg["q"], cfg["phi"], _t_grid(cfg))
    write_csv(out / "quench_trace.csv",
              ["t", "Q_tilde", "phi_tilde", "overlap", "root_fidelity"],
              zip(trace.times, trace.metric.Qtilde, trace.metric.phitilde,
                  trace.overlap_max, trace.root_fidelity))
    try:
        fit = fit_bimetric(trace.metric)
    except ValueError as err:
        from .geometry import BimetricFit
        fit = BimetricFit(A=0.0, E_g=float("nan"), residual=float("nan"),
                          degenerate=True, reason=str(err), converged=False)
    write_json(out / "bimetric_fit.json", _fit_payload(fit))
    write_json(out / "observables.json", {
        "times": list(trace.times),
        "density": trace.density,
        "corr": trace.corr,
        "energy": trace.energy,
    })
    _write_meta(out, "quench", cfg, {
        "extraction_reliable_everywhere": bool(trace.reliable.all()),
        "max_norm_error": float(trace.norm_error.max()),
    })
    return 0


def cmd_spectrum(cfg: dict) -> int:
    out = _out_dir(cfg, "spectrum")
    geom = CylinderGeometry(cfg["n"], cfg["l2"])
    g_post = metric_from_params(MetricParams(cfg["q"], cfg["phi"]))
    v10 = vkm(1, 0, geom, g_post).real
    rows = []
    H_sq = build_truncated_hamiltonian(geom, g_post)
    for E in np.linalg.eigvalsh(H_sq.to_dense()):
        rows.append(("squeezed", 0, E / v10))
    for K in range(-cfg["kmax"], cfg["kmax"] + 1):
        try:
            H_K = build_truncated_fock(geom, g_post, K=K)
        except ValueError:
            print(f"empty momentum sector K={K}, skipped", file=sys.stderr)
            continue
        for E in np.linalg.eigvalsh(H_K.to_dense()):
            rows.append(("fock", K, E / v10))
    write_csv(out / "spectrum.csv", ["basis", "K", "E"], rows)
    omega = np.arange(cfg["eta"] / 4.0, cfg["omega_max"] + 1e-12, cfg["eta"] / 4.0)
    I = spectral_function(geom, g_post, omega, cfg["eta"])
    write_csv(out / "spectral_function.csv", ["omega", "I"], zip(omega, I))
    gv = graviton_energy(geom, g_post)
    payload = {"E_g": gv.E_g, "weight": gv.weight, "E_g_raw": gv.E_g_raw,
               "E_g_pre_units": gv.E_g_pre_units,
               "spectral_peak": float(omega[np.argmax(I)])}
    write_json(out / "graviton.json", payload)
    _write_meta(out, "spectrum", cfg, {"graviton": payload})
    return 0


def cmd_variational(cfg: dict) -> int:
    out = _out_dir(cfg, "variational")
    rows = optimal_trajectory(cfg["l2"], cfg["q"], _t_grid(cfg), cfg["n_list"],
                              seed=cfg["seed"], anneal_budget=cfg["budget"],
                              threads=cfg["threads"])
    write_csv(out / "trajectory.csv", ["N", "t", "alpha", "beta", "overlap"],
              ((r.N, r.t, r.alpha, r.beta, r.overlap) for r in rows))
    failures = [r for r in rows if not r.converged]
    _write_meta(out, "variational", cfg, {
        "min_overlap": min(r.overlap for r in rows),
        "optimizer_failures": len(failures),
    })
    return 0


def _read_input_columns(path: str, required: list[str]) -> dict:
    try:
        return read_csv_columns(Path(path), required)
    except (OSError, ValueError) as err:
        raise UsageError(str(err)) from err


def cmd_extrapolate(cfg: dict) -> int:
    cols = _read_input_columns(cfg["input"],
                               ["N", "t", "alpha", "beta", "overlap"])
    out = _out_dir(cfg, "extrapolate")
    from .variational import TrajectoryPoint
    rows = [TrajectoryPoint(int(N), float(t), float(a), float(b), float(ov))
            for N, t, a, b, ov in zip(cols["N"], cols["t"], cols["alpha"],
                                      cols["beta"], cols["overlap"])]
    payload: dict = {"order": cfg["order"], "fits": {}}
    fit = extrapolate(rows, order=cfg["order"])
    for ti, t in enumerate(fit.times):
        payload["fits"][fmt(float(t))] = {
            "alpha": list(fit.alpha_coeffs[ti]),
            "beta": list(fit.beta_coeffs[ti]),
            "alpha_residual": float(fit.alpha_residuals[ti]),
            "beta_residual": float(fit.beta_residuals[ti]),
        }
    write_json(out / "extrapolation.json", payload)
    _write_meta(out, "extrapolate", cfg)
    return 0


def _trotter_circuit_with_prep(geom: CylinderGeometry, g_post, t: float,
                               k: int) -> Circuit:
    circ = Circuit(geom.n_registers)
    for gate in build_variational_circuit(ground_state_prep_params(geom),
                                          geom.N).gates:
        circ.append(gate)
    if t > 0:
        for gate in build_trotter_circuit(geom, g_post, t, k).gates:
            circ.append(gate)
    return circ


def cmd_trotter(cfg: dict) -> int:
    out = _out_dir(cfg, "trotter")
    geom = CylinderGeometry(cfg["n"], cfg["l2"])
    g_post = metric_from_params(MetricParams(cfg["q"], cfg["phi"]))
    basis = enumerate_squeezed(geom)
    H = build_truncated_hamiltonian(geom, g_post, basis=basis)
    v10 = vkm(1, 0, geom, g_post).real
    psi0 = ground_state_closed_form(geom, IDENTITY_METRIC, basis=basis)
    t_grid = _t_grid(cfg)
    exact_states = evolve_grid(H, psi0, t_grid, scale=v10)

    noise = None
    if cfg["noise_p1"] > 0 or cfg["noise_p2"] > 0 or cfg["readout"] > 0:
        eps = cfg["readout"]
        confusion = np.array([[1 - eps, eps], [eps, 1 - eps]])
        noise = NoiseModel(p1=cfg["noise_p1"], p2=cfg["noise_p2"],
                           readout=confusion if eps > 0 else None)

    header = ["t", "pipeline", "root_fidelity"] + \
        [f"density_{j}" for j in range(3 * geom.N)]
    rows = []
    corr_payload: dict = {}
    counts_payload: dict = {}
    cnots = {}
    retention = {}
    for t, psi in zip(t_grid, exact_states):
        fid, dens, corr = observables(psi, geom)
        rows.append((t, "exact", fid, *dens))
        corr_payload.setdefault("exact", {})[fmt(float(t))] = corr

        circ = _trotter_circuit_with_prep(geom, g_post, float(t), cfg["k"])
        cnots[fmt(float(t))] = cnot_count(circ)
        counts = post_select_counts(sample(circ, cfg["shots"], seed=cfg["seed"]))
        counts_payload.setdefault("circuit", {})[fmt(float(t))] = counts
        fid_c, dens_c, corr_c = estimate_observables_from_counts(counts, geom)
        rows.append((t, "circuit", fid_c, *dens_c))
        corr_payload.setdefault("circuit", {})[fmt(float(t))] = corr_c

        if noise is not None:
            raw = sample(circ, cfg["shots"], noise=noise, seed=cfg["seed"] + 1)
            kept = post_select_counts(raw)
            if not kept:
                raise RuntimeError(f"post-selection removed every sample at t={t}")
            retention[fmt(float(t))] = sum(kept.values()) / sum(raw.values())
            counts_payload.setdefault("noisy_postselected", {})[fmt(float(t))] = kept
            fid_n, dens_n, corr_n = estimate_observables_from_counts(kept, geom)
            rows.append((t, "noisy_postselected", fid_n, *dens_n))
            corr_payload.setdefault("noisy_postselected", {})[fmt(float(t))] = corr_n

    write_csv(out / "observables.csv", header, rows)
    write_json(out / "correlations.json", corr_payload)
    write_json(out / "counts.json", counts_payload)
    _write_meta(out, "trotter", cfg, {
        "cnot_count": cnots,
        "postselection_retention": retention,
        "pipelines": sorted(corr_payload.keys()),
    })
    return 0


def cmd_compare(cfg: dict) -> int:
    geom = CylinderGeometry(cfg["n"], cfg["l2"])
    if geom.N > 8:
        raise UsageError("full-model comparison needs --n <= 8")
    out = _out_dir(cfg, "compare")
    t_grid = _t_grid(cfg)
    cmp = compare_full_truncated(geom, cfg["q"], t_grid, phi_post=cfg["phi"])
    write_csv(out / "compare_trace.csv",
              ["t", "Q_full", "phi_full", "Q_trunc", "phi_trunc",
               "overlap_full", "overlap_trunc"],
              zip(t_grid, cmp.full.Qtilde, cmp.full.phitilde,
                  cmp.truncated.Qtilde, cmp.truncated.phitilde,
                  cmp.full_overlap, cmp.truncated_overlap))
    breakdown_meta = {}
    for l2 in cfg["l2_sweep"]:
        sweep_geom = CylinderGeometry(cfg["n"], l2)
        tr = run_quench(sweep_geom, cfg["q"], cfg["phi"], t_grid,
                        compute_corr=False)
        tag = fmt(float(l2))
        write_csv(out / f"breakdown_L2_{tag}.csv",
                  ["t", "Q_tilde", "phi_tilde", "overlap", "root_fidelity"],
                  zip(tr.times, tr.metric.Qtilde, tr.metric.phitilde,
                      tr.overlap_max, tr.root_fidelity))
        fit = fit_bimetric(tr.metric)
        breakdown_meta[tag] = {
            "trivial_dynamics": bool(tr.root_fidelity.min() > 0.99),
            "root_fidelity_floor": float(tr.root_fidelity.min()),
            "fit": _fit_payload(fit),
        }
    _write_meta(out, "compare", cfg, {
        "rms_Q_full_minus_trunc": cmp.rms_Q,
        "max_abs_momentum": float(np.abs(cmp.full_momentum).max()),
        "breakdown": breakdown_meta,
    })
    return 0


def cmd_bimetric_fit(cfg: dict) -> int:
    cols = _read_input_columns(cfg["input"], ["t", "Q_tilde", "phi_tilde"])
    out = _out_dir(cfg, "bimetric_fit")
    trace = MetricTrace(cols["t"], cols["Q_tilde"], cols["phi_tilde"])
    fit = fit_bimetric(trace)
    write_json(out / "bimetric_fit.json", _fit_payload(fit))
    _write_meta(out, "bimetric-fit", cfg)
    return 0


# ---------------------------------------------------------------------------
# Argument handling


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    spec = {
        "n": dict(type=int, help="number of electrons"),
        "l2": dict(type=float, help="cylinder circumference (magnetic lengths)"),
        "q": dict(type=float, help="post-quench stretch Q"),
        "phi": dict(type=float, help="post-quench rotation phi"),
        "tmax": dict(type=float, help="final time (units 1/V10)"),
        "dt": dict(type=float, help="time step"),
        "k": dict(type=int, help="Trotter step count"),
        "shots": dict(type=int, help="measurement shots"),
        "seed": dict(type=int, help="RNG seed"),
        "noise-p1": dict(type=float, help="1-qubit depolarizing probability"),
        "noise-p2": dict(type=float, help="2-qubit depolarizing probability"),
        "readout": dict(type=float, help="readout bit-flip probability"),
        "eta": dict(type=float, help="Lorentzian broadening"),
        "out": dict(type=str, help="output directory"),
        "threads": dict(type=int, help="worker threads"),
        "config": dict(type=str, help="JSON config file (flags override it)"),
    }
    for name in names:
        p.add_argument(f"--{name}", **spec[name], default=None)


DEFAULTS: dict[str, dict] = {
    "quench": dict(n=9, l2=5.477, q=0.18, phi=0.0, tmax=10.0, dt=0.05,
                   out=None, threads=1),
    "spectrum": dict(n=6, l2=5.477, q=0.18, phi=0.0, eta=0.05, omega_max=3.0,
                     kmax=6, out=None, threads=1),
    "variational": dict(l2=5.477, q=0.18, tmax=6.0, dt=0.5, seed=0,
                        budget=2000, n_list=[7, 9, 11, 13], out=None, threads=1),
    "extrapolate": dict(order=3, input=None, out=None, threads=1),
    "trotter": dict(n=5, l2=5.477, q=0.18, phi=0.0, tmax=2.5, dt=0.5, k=15,
                    shots=100000, seed=0, noise_p1=0.002, noise_p2=0.02,
                    readout=0.015, out=None, threads=1),
    "compare": dict(n=6, l2=6.245, q=0.26, phi=0.0, tmax=10.0, dt=0.1,
                    l2_sweep=[2.75, 3.15], out=None, threads=1),
    "bimetric-fit": dict(input=None, out=None, threads=1),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fqh-graviton",
        description="Geometric-quench dynamics of the 1/3 Laughlin state "
                    "near the thin-cylinder limit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quench", help="run a geometric quench and fit it")
    _add_common(p, "n", "l2", "q", "phi", "tmax", "dt", "out", "threads", "config")

    p = sub.add_parser("spectrum", help="momentum-resolved spectra and the "
                                        "quadrupole spectral function")
    _add_common(p, "n", "l2", "q", "phi", "eta", "out", "threads", "config")
    p.add_argument("--omega-max", type=float, default=None)
    p.add_argument("--kmax", type=int, default=None)

    p = sub.add_parser("variational", help="optimal ansatz parameters over time")
    _add_common(p, "l2", "q", "tmax", "dt", "seed", "out", "threads", "config")
    p.add_argument("--n-list", type=str, default=None,
                   help="comma-separated electron numbers")
    p.add_argument("--budget", type=int, default=None,
                   help="annealing evaluation budget per point")

    p = sub.add_parser("extrapolate", help="1/N extrapolation of a trajectory")
    _add_common(p, "out", "threads", "config")
    p.add_argument("--input", type=str, default=None, help="trajectory.csv path")
    p.add_argument("--order", type=int, default=None, choices=(2, 3))

    p = sub.add_parser("trotter", help="Trotter-circuit observables, with and "
                                       "without noise")
    _add_common(p, "n", "l2", "q", "phi", "tmax", "dt", "k", "shots", "seed",
                "noise-p1", "noise-p2", "readout", "out", "threads", "config")

    p = sub.add_parser("compare", help="full vs truncated model, plus the "
                                       "thin-cylinder breakdown sweep")
    _add_common(p, "n", "l2", "q", "phi", "tmax", "dt", "out", "threads", "config")
    p.add_argument("--l2-sweep", type=str, default=None,
                   help="comma-separated circumferences for the breakdown runs")

    p = sub.add_parser("bimetric-fit", help="fit a stored metric trace")
    _add_common(p, "out", "threads", "config")
    p.add_argument("--input", type=str, default=None, help="trace CSV path")
    return parser


def _effective_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[args.command])
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = json.loads(Path(args.config).read_text())
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    cfg.update(file_cfg)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        name = key
        if name in ("n_list", "l2_sweep") and isinstance(value, str):
            value = [type(cfg[name][0])(x) for x in value.split(",") if x]
        cfg[name] = value
    for key in ("input",):
        if key in cfg and cfg[key] is None and args.command in ("extrapolate",
                                                                "bimetric-fit"):
            raise UsageError("--input is required")
    _validate(cfg)
    return cfg


COMMANDS = {
    "quench": cmd_quench,
    "spectrum": cmd_spectrum,
    "variational": cmd_variational,
    "extrapolate": cmd_extrapolate,
    "trotter": cmd_trotter,
    "compare": cmd_compare,
    "bimetric-fit": cmd_bimetric_fit,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
    except (UsageError, FileNotFoundError, json.JSONDecodeError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:
        print(f"computation failed: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
