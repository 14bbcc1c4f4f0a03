import json
import math

import pytest

from spinfid import cli

TWO_PI = 2.0 * math.pi


def _run(tmp_path, *argv):
    out = tmp_path / "out"
    return cli.main([*argv, "--out", str(out)]), out


def _write_cfg(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestExitCodes:
    def test_missing_config_file(self, tmp_path):
        code, _ = _run(tmp_path, "simulate", "--config",
                       str(tmp_path / "nope.json"))
        assert code == 2

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        code, _ = _run(tmp_path, "simulate", "--config", str(path))
        assert code == 2

    def test_invalid_config_values(self, tmp_path):
        cfg = _write_cfg(tmp_path, {"runs": 0})
        code, _ = _run(tmp_path, "simulate", "--config", cfg)
        assert code == 2

    def test_numerical_failure(self, tmp_path):
        # truth far outside a very narrow prior drives the MAP search into
        # the bracket edge
        cfg = _write_cfg(tmp_path, {
            "true_signal": {"kind": "constant",
                            "omega0": TWO_PI * 1e4 + 8000.0},
            "sigma_omega": 100.0,
            "duration": 1e-3,
        })
        code, out = _run(tmp_path, "estimate", "--config", cfg)
        assert code == 3
        assert not (out / "manifest.json").exists()

    def test_success_writes_manifest(self, tmp_path):
        code, out = _run(tmp_path, "simulate", "--seed", "4")
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["subcommand"] == "simulate"
        assert manifest["seed"] == 4
        assert "git_revision" in manifest
        assert manifest["wall_time_s"] >= 0.0
        assert manifest["config"]["kind"] == "ExperimentConfig"


class TestDeterminism:
    def test_simulate_byte_identical(self, tmp_path):
        cfg = _write_cfg(tmp_path, {"duration": 5e-4})
        code1, out1 = cli.main(["simulate", "--config", cfg, "--out",
                                str(tmp_path / "a")]), tmp_path / "a"
        code2, out2 = cli.main(["simulate", "--config", cfg, "--out",
                                str(tmp_path / "b")]), tmp_path / "b"
        assert code1 == code2 == 0
        assert (out1 / "simulate.csv").read_bytes() == \
            (out2 / "simulate.csv").read_bytes()

    def test_seed_override_changes_output(self, tmp_path):
        cli.main(["simulate", "--seed", "1", "--out", str(tmp_path / "a")])
        cli.main(["simulate", "--seed", "2", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "simulate.csv").read_bytes() != \
            (tmp_path / "b" / "simulate.csv").read_bytes()


class TestSubcommands:
    def test_simulate_output_shape(self, tmp_path):
        cfg = _write_cfg(tmp_path, {"duration": 1e-4})
        code, out = _run(tmp_path, "simulate", "--config", cfg)
        assert code == 0
        lines = (out / "simulate.csv").read_text().splitlines()
        assert lines[0] == "t,y"
        assert len(lines) == 21

    def test_estimate(self, tmp_path):
        cfg = _write_cfg(tmp_path, {
            "true_signal": {"kind": "constant", "omega0": TWO_PI * 1e4 + 500.0},
            "duration": 1e-3,
        })
        code, out = _run(tmp_path, "estimate", "--config", cfg)
        assert code == 0
        lines = (out / "estimate.csv").read_text().splitlines()
        assert lines[0] == "omega_hat,neg_log_joint_per_sample"
        omega_hat = float(lines[1].split(",")[0])
        assert omega_hat == pytest.approx(TWO_PI * 1e4 + 500.0, abs=5.0)

    def test_bcrb(self, tmp_path):
        cfg = _write_cfg(tmp_path, {
            "duration": 1e-4,
            "bound_samples": 5,
        })
        code, out = _run(tmp_path, "bcrb", "--config", cfg)
        assert code == 0
        lines = (out / "bcrb.csv").read_text().splitlines()
        assert lines[0] == "t,bound,stderr,kind"
        assert lines[1].endswith("bcrb_numeric")

    def test_sweep_time(self, tmp_path):
        cfg = _write_cfg(tmp_path, {
            "sweep_axis": "time",
            "sweep_values": [1e-4, 2e-4],
            "runs": 3,
            "estimators": ["ekf"],
            "bounds": ["floor"],
        })
        code, out = _run(tmp_path, "sweep-time", "--config", cfg)
        assert code == 0
        lines = (out / "sweep-time.csv").read_text().splitlines()
        assert lines[0] == "t,rmse_ekf,stderr_ekf,floor"
        assert len(lines) == 3

    def test_sweep_n(self, tmp_path):
        cfg = _write_cfg(tmp_path, {
            "sweep_axis": "atoms",
            "sweep_values": [1e11, 1e12],
            "duration": 1e-4,
            "runs": 3,
            "estimators": ["ekf"],
        })
        code, out = _run(tmp_path, "sweep-n", "--config", cfg)
        assert code == 0
        lines = (out / "sweep-n.csv").read_text().splitlines()
        assert lines[0] == "N,rmse_ekf,stderr_ekf"
        assert len(lines) == 3

    def test_sweep_delta(self, tmp_path):
        cfg = _write_cfg(tmp_path, {
            "sweep_axis": "sampling",
            "sweep_values": [5e-6, 1e-5],
            "duration": 2e-4,
            "runs": 3,
            "estimators": ["ekf"],
        })
        code, out = _run(tmp_path, "sweep-delta", "--config", cfg)
        assert code == 0
        lines = (out / "sweep-delta.csv").read_text().splitlines()
        assert lines[0] == "Delta,rmse_ekf,stderr_ekf"
        assert len(lines) == 3

    def test_track(self, tmp_path):
        cfg = _write_cfg(tmp_path, {
            "true_signal": {"kind": "wiener", "omega0": TWO_PI * 1e4,
                            "d_c": 1e7},
            "assumed_signal": {"kind": "wiener", "omega0": TWO_PI * 1e4,
                               "d_c": 1e7},
            "duration": 5e-4,
        })
        code, out = _run(tmp_path, "track", "--config", cfg)
        assert code == 0
        lines = (out / "track.csv").read_text().splitlines()
        assert lines[0] == "k,t,omega_true,omega_hat,sigma_omega_pred,innovation,S,nis"
        assert len(lines) == 101

    def test_atoms(self, tmp_path):
        cfg = _write_cfg(tmp_path, {"duration": 5e-2, "runs": 2})
        code, out = _run(tmp_path, "atoms", "--config", cfg)
        assert code == 0
        lines = (out / "atoms.csv").read_text().splitlines()
        assert lines[0] == "run,n_hat,sigma_n,k,degenerate"
        assert len(lines) == 3

    def test_runs_override(self, tmp_path):
        cfg = _write_cfg(tmp_path, {"duration": 5e-2, "runs": 1})
        code, out = _run(tmp_path, "atoms", "--config", cfg, "--runs", "3")
        assert code == 0
        lines = (out / "atoms.csv").read_text().splitlines()
        assert len(lines) == 4
