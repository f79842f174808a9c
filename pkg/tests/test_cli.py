"""Batch driver: config validation, artifacts, exit codes, determinism."""

import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

from qmix.cli import main


def write_config(path, **over):
    cfg = {
        "schema": 1,
        "d": 1,
        "hbar": 0.5,
        "interaction": {"kind": "gaussian", "amplitude": 0.4, "width": 1.0},
        "profile": {"kind": "gaussian", "beta": 1.0},
    }
    cfg.update(over)
    path.write_text(json.dumps(cfg))
    return cfg


def run_cli(args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


SIM_BLOCK = {
    "epsilon": 0.01,
    "k_max": 0.5,
    "dk": 0.25,
    "eta_max": 2.0,
    "deta": 0.25,
    "T": 2.0,
    "dt": 0.25,
    "output_interval": 0.5,
    "snapshot_interval": 0.5,
    "skip_stability_check": True,
}


class TestConfigValidation:
    def test_unknown_key_reports_field_path(self, tmp_path):
        p = tmp_path / "c.json"
        write_config(p, interaction={"kind": "gaussian", "widht": 1.0})
        res = run_cli(["penrose", "--config", str(p)])
        assert res.exit_code == 2
        assert "interaction.widht" in res.stderr

    def test_missing_file_and_bad_json(self, tmp_path):
        res = run_cli(["penrose", "--config", str(tmp_path / "nope.json")])
        assert res.exit_code == 2
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        res = run_cli(["penrose", "--config", str(bad)])
        assert res.exit_code == 2
        assert "not valid JSON" in res.stderr

    def test_schema_and_kind_checks(self, tmp_path):
        p = tmp_path / "c.json"
        cfg = write_config(p)
        cfg["schema"] = 2
        p.write_text(json.dumps(cfg))
        assert run_cli(["penrose", "--config", str(p)]).exit_code == 2

        write_config(p, interaction={"kind": "yukawa", "alpha": 1.0})
        res = run_cli(["penrose", "--config", str(p)])
        assert res.exit_code == 2
        assert "yukawa requires d = 3" in res.stderr

        write_config(p, interaction={"kind": "gaussian", "alpha": 1.0})
        res = run_cli(["penrose", "--config", str(p)])
        assert res.exit_code == 2
        assert "only valid for the yukawa kind" in res.stderr

    def test_thread_cap_must_be_integer(self, tmp_path, monkeypatch):
        p = tmp_path / "c.json"
        write_config(p)
        monkeypatch.setenv("QMIX_THREADS", "many")
        res = run_cli(["penrose", "--config", str(p)])
        assert res.exit_code == 2
        assert "QMIX_THREADS" in res.stderr


class TestPenroseCommand:
    def test_artifacts_and_determinism(self, tmp_path):
        p = tmp_path / "c.json"
        write_config(
            p,
            penrose={"k_max": 2.0, "n_k": 4, "n_tau": 65,
                     "hbar_set": [0.0, 0.5]},
        )
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            res = run_cli(["penrose", "--config", str(p),
                           "--output", str(out)])
            assert res.exit_code == 0
            assert "verdict: stable" in res.output
            outs.append(out)
        report = json.loads((outs[0] / "penrose_report.json").read_text())
        assert report["verdict"] == "stable"
        assert report["kappa"] > 0
        assert "config_sha256" in report
        csvs = sorted(f.name for f in outs[0].glob("nyquist_*.csv"))
        assert len(csvs) == 8
        for name in ["penrose_report.json"] + csvs:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


class TestLinearCommand:
    def test_writes_trace_files(self, tmp_path):
        p = tmp_path / "c.json"
        write_config(
            p,
            linear={"dt": 0.05, "T": 2.0, "n_tau": 4096},
            traced_modes=[[0.5], [1.0]],
        )
        out = tmp_path / "out"
        res = run_cli(["linear", "--config", str(p), "--output", str(out)])
        assert res.exit_code == 0
        for label in ("0.5", "1"):
            text = (out / ("linear_%s.csv" % label)).read_text()
            lines = text.strip().split("\n")
            assert lines[0] == "t,re_volterra,im_volterra,re_green,im_green,abs_free"
            assert len([l for l in lines if not l.startswith("#")]) == 42
            assert any(l.startswith("# max_rel_gap:") for l in lines)
            assert any(l.startswith("# decay_exponent:") for l in lines)

    def test_requires_traced_modes(self, tmp_path):
        p = tmp_path / "c.json"
        write_config(p, linear={"dt": 0.05, "T": 1.0})
        res = run_cli(["linear", "--config", str(p)])
        assert res.exit_code == 2
        assert "traced_modes" in res.stderr


class TestSimulateCommand:
    def test_artifacts_and_determinism(self, tmp_path):
        p = tmp_path / "c.json"
        write_config(p, simulate=dict(SIM_BLOCK), traced_modes=[[0.25]])
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            res = run_cli(["simulate", "--config", str(p),
                           "--output", str(out)])
            assert res.exit_code == 0
            outs.append(out)
        names = ["density.csv", "monitors.csv", "scattering.json",
                 "warnings.log"]
        for name in names:
            assert (outs[0] / name).exists()
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        sc = json.loads((outs[0] / "scattering.json").read_text())
        assert sc["valid"] is True
        assert "d >= 3" in sc["note"]
        header = (outs[0] / "density.csv").read_text().split("\n")[0]
        assert header == "t,re_rho_0.25,im_rho_0.25"
        mon_lines = (outs[0] / "monitors.csv").read_text().strip().split("\n")
        assert mon_lines[0] == "t,B1,B2,B3,B4,B5"

    def test_unstable_kernel_exit_codes(self, tmp_path):
        p = tmp_path / "c.json"
        block = dict(SIM_BLOCK)
        block.update(eta_max=8.0, deta=0.5, T=8.0, dt=0.1, k_max=1.0,
                     abort_factor=3.0, skip_stability_check=False)
        write_config(
            p,
            interaction={"kind": "gaussian", "amplitude": -8.0, "width": 1.0},
            simulate=block,
        )
        out = tmp_path / "out"
        res = run_cli(["simulate", "--config", str(p), "--output", str(out)])
        assert res.exit_code == 4
        assert "stability" in res.stderr

        # forcing past the gate runs into the abort guard instead, with
        # partial artifacts retained
        res = run_cli(["simulate", "--config", str(p), "--output", str(out),
                       "--force"])
        assert res.exit_code == 3
        assert "aborted" in res.stderr
        sc = json.loads((out / "scattering.json").read_text())
        assert sc["valid"] is False
        assert "exceeded" in sc["abort_reason"]
        assert (out / "density.csv").exists()


class TestSweepCommand:
    def test_sweep_rows_follow_input_order(self, tmp_path):
        p = tmp_path / "c.json"
        write_config(
            p,
            hbar_sweep=[0.5, 0.0, 0.25],
            simulate=dict(SIM_BLOCK, T=1.0),
            traced_modes=[[0.25]],
        )
        out = tmp_path / "out"
        res = run_cli(["sweep-hbar", "--config", str(p), "--output", str(out)])
        assert res.exit_code == 0
        lines = (out / "sweep.csv").read_text().strip().split("\n")
        assert lines[0] == "hbar,density_distance,profile_distance"
        hbars = [float(l.split(",")[0]) for l in lines[1:]
                 if not l.startswith("#")]
        assert hbars == [0.5, 0.0, 0.25]
        assert any(l.startswith("# fitted_order:") for l in lines)

    def test_zero_comparison_point_required(self, tmp_path):
        p = tmp_path / "c.json"
        write_config(p, hbar_sweep=[0.5, 0.25], simulate=dict(SIM_BLOCK),
                     traced_modes=[[0.25]])
        res = run_cli(["sweep-hbar", "--config", str(p)])
        assert res.exit_code == 2
        assert "comparison point" in res.stderr


def test_console_entry_point(tmp_path):
    p = tmp_path / "c.json"
    write_config(
        p,
        penrose={"k_max": 2.0, "n_k": 4, "n_tau": 65, "hbar_set": [0.5]},
    )
    proc = subprocess.run(
        [sys.executable, "-m", "qmix.cli", "penrose",
         "--config", str(p), "--output", str(tmp_path / "out")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "verdict: stable" in proc.stdout
