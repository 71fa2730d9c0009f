"""The figure scripts consume real CLI outputs through the file schemas only.

A small acceptance-style run of the simulation CLI is produced once per
session; every script must render from it without error, reject schema
violations with a nonzero exit, and produce byte-identical files on re-runs.
"""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

PLOTS = Path(__file__).resolve().parents[1]
REPO = PLOTS.parent


def run_cli(args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "fqh_graviton.cli", *args],
        cwd=cwd, capture_output=True, text=True,
        env={"PATH": "/usr/bin:/bin", "PYTHONPATH": str(REPO / "src")},
    )


def run_script(script, args):
    return subprocess.run(
        [sys.executable, str(PLOTS / script), *args],
        capture_output=True, text=True,
        env={"PATH": "/usr/bin:/bin", "PYTHONPATH": str(PLOTS),
             "MPLCONFIGDIR": "/tmp/mplconfig"},
    )


@pytest.fixture(scope="session")
def cli_outputs(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli_runs")
    r = run_cli(["quench", "--n", "5", "--tmax", "6", "--dt", "0.25",
                 "--out", str(base / "quench")])
    assert r.returncode == 0, r.stderr
    r = run_cli(["spectrum", "--n", "4", "--kmax", "2",
                 "--out", str(base / "spectrum")])
    assert r.returncode == 0, r.stderr
    r = run_cli(["trotter", "--n", "4", "--k", "4", "--tmax", "1.5",
                 "--dt", "0.5", "--shots", "5000",
                 "--out", str(base / "trotter")])
    assert r.returncode == 0, r.stderr
    r = run_cli(["variational", "--n-list", "4,5,6,7", "--tmax", "1.0",
                 "--dt", "0.5", "--budget", "300",
                 "--out", str(base / "variational")])
    assert r.returncode == 0, r.stderr
    r = run_cli(["extrapolate", "--input",
                 str(base / "variational" / "trajectory.csv"),
                 "--order", "3", "--out", str(base / "extrap3")])
    assert r.returncode == 0, r.stderr
    r = run_cli(["extrapolate", "--input",
                 str(base / "variational" / "trajectory.csv"),
                 "--order", "2", "--out", str(base / "extrap2")])
    assert r.returncode == 0, r.stderr
    return base


class TestQuenchFigure:
    def test_renders(self, cli_outputs, tmp_path):
        out = tmp_path / "quench.pdf"
        r = run_script("plot_quench.py", [
            str(cli_outputs / "quench" / "quench_trace.csv"),
            str(cli_outputs / "quench" / "bimetric_fit.json"),
            "--spectral", str(cli_outputs / "spectrum" / "spectral_function.csv"),
            "-o", str(out)])
        assert r.returncode == 0, r.stderr
        assert out.is_file() and out.stat().st_size > 0

    def test_fit_overlay_suppressible(self, cli_outputs, tmp_path):
        out = tmp_path / "nofit.pdf"
        r = run_script("plot_quench.py", [
            str(cli_outputs / "quench" / "quench_trace.csv"),
            str(cli_outputs / "quench" / "bimetric_fit.json"),
            "--no-fit-overlay", "-o", str(out)])
        assert r.returncode == 0, r.stderr
        assert out.is_file()

    def test_deterministic_output(self, cli_outputs, tmp_path):
        outs = []
        for name in ("a.pdf", "b.pdf"):
            out = tmp_path / name
            r = run_script("plot_quench.py", [
                str(cli_outputs / "quench" / "quench_trace.csv"),
                str(cli_outputs / "quench" / "bimetric_fit.json"),
                "-o", str(out)])
            assert r.returncode == 0, r.stderr
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_missing_column_aborts(self, cli_outputs, tmp_path):
        broken = tmp_path / "broken.csv"
        lines = (cli_outputs / "quench" / "quench_trace.csv").read_text().splitlines()
        broken.write_text("\n".join(
            line.replace("Q_tilde", "whatever") for line in lines))
        out = tmp_path / "x.pdf"
        r = run_script("plot_quench.py", [
            str(broken), str(cli_outputs / "quench" / "bimetric_fit.json"),
            "-o", str(out)])
        assert r.returncode != 0
        assert not out.exists()

    def test_empty_trace_aborts_without_image(self, cli_outputs, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("t,Q_tilde,phi_tilde,overlap,root_fidelity\n")
        out = tmp_path / "y.pdf"
        r = run_script("plot_quench.py", [
            str(empty), str(cli_outputs / "quench" / "bimetric_fit.json"),
            "-o", str(out)])
        assert r.returncode != 0
        assert not out.exists()

    def test_inputs_never_modified(self, cli_outputs, tmp_path):
        src = cli_outputs / "quench" / "quench_trace.csv"
        before = src.read_bytes()
        run_script("plot_quench.py", [
            str(src), str(cli_outputs / "quench" / "bimetric_fit.json"),
            "-o", str(tmp_path / "z.pdf")])
        assert src.read_bytes() == before


class TestObservablesFigure:
    def test_renders_all_pipelines(self, cli_outputs, tmp_path):
        out = tmp_path / "obs.pdf"
        r = run_script("plot_observables.py", [
            str(cli_outputs / "trotter" / "observables.csv"),
            str(cli_outputs / "trotter" / "correlations.json"),
            str(cli_outputs / "trotter" / "run_meta.json"),
            "-o", str(out)])
        assert r.returncode == 0, r.stderr
        assert out.is_file() and out.stat().st_size > 0

    def test_missing_noisy_series_warns_but_renders(self, cli_outputs, tmp_path):
        # rebuild inputs without the noisy pipeline
        trotter = cli_outputs / "trotter"
        stripped = tmp_path / "stripped"
        stripped.mkdir()
        rows = (trotter / "observables.csv").read_text().splitlines()
        kept = [rows[0]] + [r for r in rows[1:] if ",noisy_postselected," not in r]
        (stripped / "observables.csv").write_text("\n".join(kept) + "\n")
        corr = json.loads((trotter / "correlations.json").read_text())
        corr.pop("noisy_postselected", None)
        (stripped / "correlations.json").write_text(json.dumps(corr))
        meta = json.loads((trotter / "run_meta.json").read_text())
        meta["pipelines"] = ["circuit", "exact"]
        (stripped / "run_meta.json").write_text(json.dumps(meta))
        out = tmp_path / "obs2.pdf"
        r = run_script("plot_observables.py", [
            str(stripped / "observables.csv"),
            str(stripped / "correlations.json"),
            str(stripped / "run_meta.json"),
            "-o", str(out)])
        assert r.returncode == 0, r.stderr
        assert "omitted" in r.stderr
        assert out.is_file()

    def test_metadata_without_exact_pipeline_aborts(self, cli_outputs, tmp_path):
        meta = json.loads((cli_outputs / "trotter" / "run_meta.json").read_text())
        meta["pipelines"] = ["circuit"]
        bad = tmp_path / "meta.json"
        bad.write_text(json.dumps(meta))
        r = run_script("plot_observables.py", [
            str(cli_outputs / "trotter" / "observables.csv"),
            str(cli_outputs / "trotter" / "correlations.json"),
            str(bad), "-o", str(tmp_path / "n.pdf")])
        assert r.returncode != 0


class TestVariationalFigure:
    def test_renders_with_extrapolation_band(self, cli_outputs, tmp_path):
        out = tmp_path / "var.pdf"
        r = run_script("plot_variational.py", [
            str(cli_outputs / "variational" / "trajectory.csv"),
            str(cli_outputs / "extrap3" / "extrapolation.json"),
            "--quadratic", str(cli_outputs / "extrap2" / "extrapolation.json"),
            "-o", str(out)])
        assert r.returncode == 0, r.stderr
        assert out.is_file() and out.stat().st_size > 0

    def test_single_n_omits_extrapolation_line(self, cli_outputs, tmp_path):
        one_n = tmp_path / "one.csv"
        rows = (cli_outputs / "variational" / "trajectory.csv").read_text().splitlines()
        kept = [rows[0]] + [r for r in rows[1:] if r.startswith("5,")]
        one_n.write_text("\n".join(kept) + "\n")
        out = tmp_path / "one.pdf"
        r = run_script("plot_variational.py", [
            str(one_n), str(cli_outputs / "extrap3" / "extrapolation.json"),
            "-o", str(out)])
        assert r.returncode == 0, r.stderr
        assert "omitted" in r.stderr
        assert out.is_file()

    def test_trajectory_only(self, cli_outputs, tmp_path):
        out = tmp_path / "traj.pdf"
        r = run_script("plot_variational.py", [
            str(cli_outputs / "variational" / "trajectory.csv"),
            "-o", str(out)])
        assert r.returncode == 0, r.stderr
        assert out.is_file()

    def test_schema_violation_aborts(self, cli_outputs, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"order": 3}))
        r = run_script("plot_variational.py", [
            str(cli_outputs / "variational" / "trajectory.csv"),
            str(bad), "-o", str(tmp_path / "v.pdf")])
        assert r.returncode != 0
