import os

import numpy as np
import pytest

from stopsum.cli import main, parse_dist, parse_tau
from stopsum.dists import CountingDist, ParametricDist


class TestParsers:
    def test_parse_dist_forms(self):
        assert parse_dist("pareto:2") == ParametricDist.pareto(2.0)
        assert parse_dist("pareto:2,1.5") == ParametricDist.pareto(2.0, 1.5)
        assert parse_dist("lognormal:0,1") == ParametricDist.lognormal(0.0, 1.0)
        shifted = parse_dist("pareto:2,1:-3")
        assert shifted.shift == -3.0

    def test_parse_dist_errors(self):
        with pytest.raises(ValueError, match="unknown family"):
            parse_dist("cauchy:1")
        with pytest.raises(ValueError, match="expected"):
            parse_dist("pareto")

    def test_parse_tau(self):
        assert parse_tau("det:3") == CountingDist.deterministic(3)
        assert parse_tau("geom:0.5") == CountingDist.geometric(0.5)
        assert parse_tau("poisson:2") == CountingDist.poisson(2.0)
        with pytest.raises(ValueError, match="unknown counting"):
            parse_tau("negbin:2")


def read_summary(out_dir):
    entries = {}
    with open(os.path.join(out_dir, "summary.txt")) as fh:
        for line in fh:
            key, _, value = line.strip().partition("=")
            entries[key] = value
    return entries


class TestSubcommands:
    def test_ratio_writes_curve_and_summary(self, tmp_path):
        out = str(tmp_path)
        code = main(["ratio", "--dist", "pareto:2", "--tau", "det:2",
                     "--step", "0.5", "--xmax", "512", "--out", out])
        assert code == 0
        entries = read_summary(out)
        assert entries["pass"] == "true"
        assert float(entries["theoretical"]) == 2.0
        lines = open(os.path.join(out, "ratio.csv")).read().splitlines()
        assert lines[0] == "# Etau=2.0"
        assert lines[2] == "x,ratio,err_lo,err_hi"

    def test_byte_identical_reruns(self, tmp_path):
        args = ["ratio", "--dist", "pareto:2", "--tau", "det:2",
                "--step", "0.5", "--xmax", "256"]
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(args + ["--out", out1]) == 0
        assert main(args + ["--out", out2]) == 0
        for name in ("ratio.csv", "summary.txt"):
            a = open(os.path.join(out1, name), "rb").read()
            b = open(os.path.join(out2, name), "rb").read()
            assert a == b

    def test_build_h_blocks(self, tmp_path):
        out = str(tmp_path)
        code = main(["build-h", "--dist", "pareto:2", "--delta", "1", "--blocks", "6",
                     "--out", out])
        assert code == 0
        entries = read_summary(out)
        assert entries["pass"] == "true"
        assert float(entries["max_block_residual"]) < 1e-9
        rows = open(os.path.join(out, "h.csv")).read().splitlines()
        assert rows[1] == "n,x_n,eps_n,h_xn"
        assert len(rows) == 2 + 6

    def test_tilt_check(self, tmp_path):
        out = str(tmp_path)
        code = main(["tilt-check", "--dist", "exponential:1", "--tau", "geom:0.4",
                     "--gamma", "0.5", "--step", "0.05", "--xmax", "60", "--out", out])
        assert code == 0
        entries = read_summary(out)
        assert entries["pass"] == "true"
        assert float(entries["measured"]) < 1e-6

    def test_pk(self, tmp_path):
        out = str(tmp_path)
        code = main(["pk", "--dist", "exponential:1", "--p", "0.3",
                     "--step", "0.05", "--xmax", "50", "--out", out])
        assert code == 0
        entries = read_summary(out)
        assert abs(float(entries["measured"]) - 0.3) < 1e-6

    def test_cpoisson(self, tmp_path):
        out = str(tmp_path)
        code = main(["cpoisson", "--dist", "pareto:2", "--t", "0.5",
                     "--step", "0.5", "--xmax", "1024", "--out", out])
        assert code == 0
        assert read_summary(out)["pass"] == "true"

    def test_branching(self, tmp_path):
        out = str(tmp_path)
        code = main(["branching", "--dist", "pareto:2", "--A", "0.5",
                     "--step", "0.5", "--xmax", "1024", "--nmax", "40", "--out", out])
        assert code == 0
        entries = read_summary(out)
        assert float(entries["theoretical"]) == 2.0
        assert entries["pass"] == "true"

    def test_infdiv(self, tmp_path):
        out = str(tmp_path)
        code = main(["infdiv", "--dist", "pareto:2", "--mu", "2", "--drift", "0.2",
                     "--small", "0.5:0.4,0.9:0.3", "--step", "0.5", "--xmax", "2048",
                     "--out", out])
        assert code == 0
        entries = read_summary(out)
        assert float(entries["theoretical"]) == 1.0

    def test_simulate_stopped_mode(self, tmp_path):
        out = str(tmp_path)
        code = main(["simulate", "--mode", "stopped", "--dist", "pareto:2",
                     "--tau", "geom:0.5", "--paths", "20000", "--seed", "3",
                     "--step", "0.25", "--xmax", "256", "--tol", "4", "--out", out])
        assert code == 0
        csv = open(os.path.join(out, "simulate.csv")).read().splitlines()
        assert csv[0] == "x,estimate,stderr,n,estimator"

    def test_config_file_defaults_and_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("step=0.5\nxmax=256\ntau=det:2\n")
        out1 = str(tmp_path / "a")
        code = main(["ratio", "--dist", "pareto:2", "--config", str(cfg), "--out", out1])
        assert code == 0
        # flag overrides the config value
        out2 = str(tmp_path / "b")
        code = main(["ratio", "--dist", "pareto:2", "--config", str(cfg),
                     "--tau", "det:1", "--out", out2])
        assert code == 0
        assert read_summary(out1)["tau"] == "det:2"
        assert read_summary(out2)["tau"] == "det:1"


class TestExitCodes:
    def test_unknown_family_is_precondition_violation(self, tmp_path):
        assert main(["ratio", "--dist", "cauchy:1", "--tau", "det:2",
                     "--out", str(tmp_path)]) == 2

    def test_unknown_flag_exits_two(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["ratio", "--dist", "pareto:2", "--tau", "det:2", "--bogus", "1"])
        assert exc.value.code == 2

    def test_divergent_tilt_is_precondition_violation(self, tmp_path):
        assert main(["tilt-check", "--dist", "exponential:1", "--tau", "geom:0.6",
                     "--gamma", "0.9", "--step", "0.02", "--xmax", "60",
                     "--out", str(tmp_path)]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["ratio", "--dist", "pareto:2", "--tau", "det:2",
                     "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 2
