"""Command-line front door tests."""

import json
from pathlib import Path

import pytest

from torweyl.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestConfigParsing:
    def test_missing_file_names_path(self, capsys, tmp_path):
        code, _, err = run(capsys, "derive-params",
                           "--config", str(tmp_path / "nope.cfg"),
                           "--out", str(tmp_path))
        assert code == EXIT_CONFIG
        assert "nope.cfg" in err

    def test_unknown_key_names_line(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("plan.s = 2\nplan.bogus = 1\n")
        code, _, err = run(capsys, "derive-params", "--config", str(cfg),
                           "--out", str(tmp_path))
        assert code == EXIT_CONFIG
        assert "plan.bogus" in err and "line 2" in err

    def test_malformed_line_reported(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("plan.s 2\n")
        code, _, err = run(capsys, "derive-params", "--config", str(cfg),
                           "--out", str(tmp_path))
        assert code == EXIT_CONFIG and "line 1" in err

    def test_bad_value_reported(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("plan.s = 2\nplan.epsilon = frog\n"
                       "plan.kappa = 0.25\nplan.h = 0.1\n")
        code, _, err = run(capsys, "derive-params", "--config", str(cfg),
                           "--out", str(tmp_path))
        assert code == EXIT_CONFIG and "plan.epsilon" in err


class TestDeriveParams:
    def test_reference_output(self, capsys, tmp_path):
        code, out, _ = run(capsys, "derive-params",
                           "--config", str(CONFIGS / "derive_params.cfg"),
                           "--out", str(tmp_path))
        assert code == EXIT_OK
        assert "M = 2.75" in out
        assert "M_tilde = 4.0" in out
        assert "N1 = 10.0" in out
        params = json.loads((tmp_path / "params.json").read_text())
        assert params["D"] == 11246
        assert (tmp_path / "params.txt").exists()

    def test_invalid_window_is_config_error(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("plan.s = 2\nplan.epsilon = 1.6\n"
                       "plan.kappa = 0.25\nplan.h = 0.1\n")
        code, _, err = run(capsys, "derive-params", "--config", str(cfg),
                           "--out", str(tmp_path))
        assert code == EXIT_CONFIG and "epsilon" in err


class TestVolume:
    def test_strip_volume_and_kappa(self, capsys, tmp_path):
        code, out, _ = run(capsys, "volume",
                           "--config", str(CONFIGS / "volume.cfg"),
                           "--out", str(tmp_path))
        assert code == EXIT_OK
        payload = json.loads((tmp_path / "volume.json").read_text())
        assert payload["volume"] == pytest.approx(4.0784, rel=5e-3)
        assert payload["prediction"] == pytest.approx(64.91, rel=5e-3)
        assert payload["kappa_hat"] == pytest.approx(1.0, abs=0.05)
        assert "volume =" in out

    def test_degenerate_kappa_is_numeric_failure(self, capsys, tmp_path):
        cfg = tmp_path / "vol.cfg"
        cfg.write_text(
            "symbol.model = xi+exp(-ix)\nregion.rect = -1 1 0.1 0.9\n"
            "grid.n_x = 256\ngrid.n_xi = 256\nkappa.z = 9 9\n")
        code, _, err = run(capsys, "volume", "--config", str(cfg),
                           "--out", str(tmp_path))
        assert code == EXIT_NUMERIC


class TestSpectrum:
    def test_outputs_written(self, capsys, tmp_path):
        code, out, _ = run(capsys, "spectrum",
                           "--config", str(CONFIGS / "spectrum.cfg"),
                           "--out", str(tmp_path))
        assert code == EXIT_OK
        eigs = (tmp_path / "eigs_0.05_base.csv").read_text().splitlines()
        assert eigs[0] == "schema=torweyl.eigs.v1"
        assert eigs[1] == "re,im"
        assert (tmp_path / "eigs_0.05_0.csv").exists()
        pseudo = (tmp_path / "pseudospec_0.05.csv").read_text().splitlines()
        assert pseudo[0] == "schema=torweyl.pseudospec.v1"
        assert pseudo[1] == "re,im,value"
        assert len(pseudo) == 2 + 24 * 12


class TestWeylEnsemble:
    def test_outputs_and_determinism(self, capsys, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out_dir in (out_a, out_b):
            code, _, _ = run(capsys, "weyl-ensemble",
                             "--config", str(CONFIGS / "weyl_small.cfg"),
                             "--out", str(out_dir),
                             "--trials", "1", "--seed", "7")
            assert code == EXIT_OK
        for name in ("report.json", "trials.csv", "params.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
        report = json.loads((out_a / "report.json").read_text())
        assert report["schema"] == "torweyl.report.v1"
        assert report["config"]["master_seed"] == 7
        assert report["config"]["n_trials"] == 1
        rows = (out_a / "trials.csv").read_text().splitlines()
        assert rows[0] == "schema=torweyl.trials.v1"
        assert (out_a / "eigs_0.1_base.csv").exists()
        assert (out_a / "eigs_0.1_0.csv").exists()

    def test_symmetry_violation_is_config_error(self, capsys, tmp_path):
        cfg = tmp_path / "weyl.cfg"
        cfg.write_text(
            "symbol.model = xi+exp(-ix)\nregion.rect = 0.2 0.8 -0.4 0.4\n"
            "omega.rect = -0.2 1.4 -0.9 1.3\nrun.h_list = 0.1\n")
        code, _, err = run(capsys, "weyl-ensemble", "--config", str(cfg),
                           "--out", str(tmp_path))
        assert code == EXIT_CONFIG


class TestLineCheck:
    def test_residuals_and_counts(self, capsys, tmp_path):
        code, out, _ = run(capsys, "line-check",
                           "--config", str(CONFIGS / "line_check.cfg"),
                           "--out", str(tmp_path))
        assert code == EXIT_OK
        payload = json.loads((tmp_path / "linecheck.json").read_text())
        assert max(payload["residuals"]) <= 1e-8
        assert payload["region_counts"] == [0] * 5
        assert "max quasimode residual" in out


class TestIdentityChecks:
    def test_all_pass(self, capsys, tmp_path):
        code, out, _ = run(capsys, "identity-checks",
                           "--config", str(CONFIGS / "identity_checks.cfg"),
                           "--out", str(tmp_path))
        assert code == EXIT_OK
        assert out.count("PASS") == 4
        assert "FAIL" not in out
        payload = json.loads((tmp_path / "identity_checks.json").read_text())
        assert all(c["pass"] for c in payload["checks"])
