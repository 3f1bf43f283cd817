import csv
import json
import math
import subprocess
import sys

import pytest

from fraclab.angular import tan_root
from fraclab.constants import a_s, b_s
from fraclab.cli import ConfigError, ExperimentConfig, load_config, main


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_cli(args):
    return main([str(a) for a in args])


class TestScenarios:
    def test_constants(self, tmp_path):
        assert run_cli(["constants", "--out", tmp_path]) == 0
        rows = read(tmp_path / "constants.csv")
        assert list(rows[0]) == ["s", "c1s", "a_s", "b_s", "kappa_bar", "hardy", "mu_mid", "identity_residual"]
        assert [float(r["s"]) for r in rows] == [0.3, 0.5, 0.6, 0.75, 0.9]
        assert all(float(r["identity_residual"]) <= 1e-8 for r in rows)
        g = read(tmp_path / "gamma_n.csv")
        assert all(abs(float(r["gamma_n"]) - 2) <= 1e-6 for r in g)
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert set(man) == {"config", "versions", "tolerances", "files", "wall_clock"}
        assert man["files"] == ["constants.csv", "gamma_n.csv"]

    def test_dirichlet_rate(self, tmp_path):
        assert run_cli(["dirichlet_rate", "--s", "0.75", "--n", "512", "--f", "const1", "--out", tmp_path]) == 0
        rows = read(tmp_path / "rates.csv")
        assert {r["side"] for r in rows} == {"left", "right"}
        for r in rows:
            assert float(r["exponent"]) == pytest.approx(0.5, abs=0.05)
            assert r["status"] == "ok"

    def test_neumann_rate(self, tmp_path):
        assert run_cli(["neumann_rate", "--s", "0.8", "--n", "256", "--out", tmp_path]) == 0
        rows = read(tmp_path / "rates.csv")
        assert "first_limit" in rows[0] and rows[0]["bc"] == "neumann"

    def test_eigen_half(self, tmp_path):
        assert run_cli(["eigen", "--s", "0.5", "--out", tmp_path]) == 0
        (row,) = read(tmp_path / "eigen.csv")
        assert abs(float(row["lambda1"])) <= 1e-6
        assert float(row["sqrt_lambda2"]) == pytest.approx(1.43030, abs=1e-3)
        assert float(row["tan_root"]) == pytest.approx(tan_root(1))

    def test_solve_manufactured(self, tmp_path):
        assert run_cli(["solve", "--s", "0.7", "--n", "32,64", "--f", "manufactured", "--out", tmp_path]) == 0
        summ = read(tmp_path / "solve_summary.csv")
        errs = [float(r["l2_error"]) for r in summ]
        assert errs[1] < errs[0]
        assert len(read(tmp_path / "solve.csv")) == 33 + 65

    def test_eval_op(self, tmp_path):
        assert run_cli(["eval-op", "--s", "0.75", "--out", tmp_path, "--seed", "5"]) == 0
        for r in read(tmp_path / "eval-op.csv"):
            assert abs(float(r["flap_omega_2sm1"])) <= 1e-6
            assert float(r["zero_ext_mid"]) == pytest.approx(float(r["hardy_target"]), rel=1e-6)
        for r in read(tmp_path / "killing_identity.csv"):
            assert abs(float(r["gap"])) <= float(r["error_bound"]) + 1e-12

    def test_extension(self, tmp_path):
        assert run_cli(["extension", "--s", "0.6", "--out", tmp_path]) == 0
        (row,) = read(tmp_path / "extension.csv")
        assert float(row["relative_error"]) <= 1e-3
        assert float(row["w0_derivative_max_error"]) <= 1e-6

    def test_limit(self, tmp_path):
        assert run_cli(["limit-s1", "--s", "0.9,0.99", "--n", "128", "--out", tmp_path]) == 0
        rows = read(tmp_path / "limit-s1.csv")
        for bc in ("dirichlet", "neumann"):
            e = [float(r["l2_error"]) for r in rows if r["bc"] == bc]
            assert e[0] > e[1]

    def test_csv_precision(self, tmp_path):
        run_cli(["constants", "--s", "0.3", "--out", tmp_path])
        (row,) = read(tmp_path / "constants.csv")
        # 17 significant digits round-trip every double exactly
        assert float(row["a_s"]) == a_s(0.3)
        assert float(row["b_s"]) == b_s(0.3)


class TestDeterminism:
    def test_byte_identical(self, tmp_path):
        for d in ("a", "b"):
            assert run_cli(["eval-op", "--s", "0.6,0.9", "--seed", "17", "--out", tmp_path / d]) == 0
        for name in ("eval-op.csv", "killing_identity.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_samples(self, tmp_path):
        run_cli(["eval-op", "--s", "0.6", "--seed", "1", "--out", tmp_path / "a"])
        run_cli(["eval-op", "--s", "0.6", "--seed", "2", "--out", tmp_path / "b"])
        assert (tmp_path / "a" / "killing_identity.csv").read_bytes() != \
            (tmp_path / "b" / "killing_identity.csv").read_bytes()

    def test_threads_do_not_change_output(self, tmp_path):
        for d, k in (("a", 1), ("b", 3)):
            run_cli(["solve", "--s", "0.7", "--n", "64", "--threads", k, "--out", tmp_path / d])
        assert (tmp_path / "a" / "solve.csv").read_bytes() == (tmp_path / "b" / "solve.csv").read_bytes()


class TestConfig:
    def test_ini_file(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text(f"[experiment]\nscenario = eigen\ns = 0.75\nn = 64\nout = {tmp_path / 'o'}\n")
        assert run_cli(["--config", ini]) == 0
        (row,) = read(tmp_path / "o" / "eigen.csv")
        assert int(row["n"]) == 64

    def test_command_line_overrides_file(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[experiment]\nscenario = constants\ns = 0.3\n")
        cfg = load_config(str(ini), {"s": "0.6,0.7", "out": None})
        assert cfg.s == [0.6, 0.7]

    def test_alias_sets_bc(self):
        cfg = load_config(None, {"scenario": "neumann_rate"})
        assert cfg.scenario == "rates" and cfg.bc == "neumann"

    @pytest.mark.parametrize("args", [
        ["constants", "--s", "1.2"],
        ["solve", "--s", "0.3", "--bc", "dirichlet"],
        ["solve", "--f", "cosine"],
        ["eigen", "--n", "16"],
        ["solve", "--n", "33"],
        ["constants", "--seed", "-1"],
        ["constants", "--s", "abc"],
    ])
    def test_config_errors_exit_2(self, tmp_path, args, capsys):
        assert run_cli(args + ["--out", tmp_path]) == 2
        rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert rec["kind"] == "config" and rec["exit_code"] == 2
        assert json.loads((tmp_path / "error.json").read_text())["status"] == "error"

    def test_bad_ini(self, tmp_path):
        ini = tmp_path / "bad.ini"
        ini.write_text("[other]\nscenario = eigen\n")
        assert run_cli(["--config", ini, "--out", tmp_path]) == 2
        ini.write_text("[experiment]\nscenario = eigen\nwhatever = 3\n")
        assert run_cli(["--config", ini, "--out", tmp_path]) == 2

    def test_missing_scenario(self, tmp_path):
        assert run_cli(["--out", tmp_path]) == 2

    def test_validate(self):
        with pytest.raises(ConfigError):
            ExperimentConfig("nope").validate()


def test_numerical_failure_exit_3(tmp_path, capsys):
    assert run_cli(["rates", "--bc", "neumann", "--s", "0.8", "--n", "16", "--out", tmp_path]) == 3
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["kind"] == "numerical" and rec["type"] == "WindowError"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fraclab", "constants", "--s", "0.5", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["status"] == "ok"
