"""Tests for the command line interface and its exit-code contract."""

import json

import numpy as np
import pytest

from ssnewton.cli import EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, main

BENCH_CONFIG = {
    "h_exponent": 1,
    "p": 1,
    "lambda": 1000.0,
    "mu": 1000.0,
    "hardening": 500.0,
    "sigma_y": 5.0,
    "rho": 25.0,
    "load_scale": 1.0,
}


def write_config(tmp_path, extra=None, **overrides):
    data = dict(BENCH_CONFIG, **overrides)
    if extra:
        data.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


def write_pair_file(tmp_path, F, G):
    lines = [str(F.shape[0])]
    for M in (F, G):
        lines += [" ".join(repr(float(v)) for v in row) for row in M]
    path = tmp_path / "pair.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


class TestRunCommand:
    def test_single_run_success(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        code = main(["run", "--config", str(cfg), "--mode", "single_run", "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "run.csv").exists()
        assert (out / "summary.json").exists()

    def test_invalid_json_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{oops")
        code = main(["run", "--config", str(cfg), "--mode", "single_run", "--out", str(tmp_path)])
        assert code == EXIT_VALIDATION
        assert "error" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        code = main(
            ["run", "--config", str(tmp_path / "none.json"), "--mode", "single_run",
             "--out", str(tmp_path)]
        )
        assert code == EXIT_VALIDATION

    def test_unknown_field(self, tmp_path):
        cfg = write_config(tmp_path, extra={"mystery": 1})
        code = main(["run", "--config", str(cfg), "--mode", "single_run", "--out", str(tmp_path)])
        assert code == EXIT_VALIDATION

    def test_bad_mode_is_validation_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        code = main(["run", "--config", str(cfg), "--mode", "bogus", "--out", str(tmp_path)])
        assert code == EXIT_VALIDATION

    def test_solver_failure_exit_code(self, tmp_path, capsys):
        cfg = write_config(tmp_path, extra={"solver": {"max_iter": 1}})
        out = tmp_path / "out"
        code = main(["run", "--config", str(cfg), "--mode", "single_run", "--out", str(out)])
        assert code == EXIT_SOLVER
        assert "solver failure" in capsys.readouterr().err

    def test_rho_sweep_with_config_list(self, tmp_path):
        cfg = write_config(tmp_path, extra={"rho_list": [10.0, 25.0]})
        out = tmp_path / "out"
        code = main(["run", "--config", str(cfg), "--mode", "rho_sweep", "--out", str(out)])
        assert code == EXIT_OK
        lines = (out / "rho_sweep.csv").read_text().strip().splitlines()
        assert len(lines) == 3


class TestCertifyPair:
    def test_worked_example(self, tmp_path, capsys):
        F = np.array([[-3, 1, 1, -3], [1, -3, -3, 1], [1, -3, -3, 1], [-3, 1, 1, -3]], float)
        G = np.array([[10, 4, -4, -10], [4, 10, -10, -4], [-4, -10, 10, 4], [-10, -4, 4, 10]], float)
        path = write_pair_file(tmp_path, F, G)
        code = main(["certify-pair", "--in", str(path)])
        assert code == EXIT_OK
        cert = json.loads(capsys.readouterr().out)
        assert cert["is_eigencomplementary"] is True
        assert cert["failure_reason"] is None

    def test_rejected_pair_still_prints_certificate(self, tmp_path, capsys):
        path = write_pair_file(tmp_path, np.eye(2), np.eye(2))
        code = main(["certify-pair", "--in", str(path)])
        assert code == EXIT_OK
        cert = json.loads(capsys.readouterr().out)
        assert cert["is_eigencomplementary"] is False
        assert cert["failure_reason"] == "F_not_neg_semidef"

    def test_missing_file(self, tmp_path, capsys):
        code = main(["certify-pair", "--in", str(tmp_path / "none.txt")])
        assert code == EXIT_VALIDATION

    def test_malformed_file(self, tmp_path, capsys):
        path = tmp_path / "pair.txt"
        path.write_text("3\n1 2 3\n")
        code = main(["certify-pair", "--in", str(path)])
        assert code == EXIT_VALIDATION

    def test_asymmetric_input_rejected(self, tmp_path):
        path = tmp_path / "pair.txt"
        path.write_text("2\n0 1\n0 0\n1 0\n0 1\n")
        code = main(["certify-pair", "--in", str(path)])
        assert code == EXIT_VALIDATION


class TestArgumentHandling:
    def test_usage_error_is_validation(self):
        assert main(["run"]) == EXIT_VALIDATION

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == EXIT_OK
