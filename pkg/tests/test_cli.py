import json

import numpy as np
import pytest

from hypac import cli
from hypac.verify import Claim


def run(argv, tmp_path, name="out"):
    out = tmp_path / name
    return cli.main([*argv, "--out", str(out)]), out


class TestConfig:
    def test_defaults(self):
        cfg = cli.resolve_config("disk", None, {})
        assert cfg["n"] == 2 and cfg["k"] == pytest.approx(2 / 9)
        assert cfg["Nr"] == 150 and cfg["out"].endswith("disk")

    def test_flags_override_file(self):
        cfg = cli.resolve_config("hyperbolic", {"T": 5.0, "N": 100}, {"T": 8.0, "N": None})
        assert cfg["T"] == 8.0 and cfg["N"] == 100

    def test_unknown_key(self):
        with pytest.raises(cli.ConfigError):
            cli.resolve_config("roots", {"Nr": 3}, {})

    def test_wrong_type(self):
        with pytest.raises(cli.ConfigError):
            cli.resolve_config("disk", {"Nr": "many"}, {})

    def test_command_mismatch(self):
        with pytest.raises(cli.ConfigError):
            cli.resolve_config("roots", {"command": "disk"}, {})

    @pytest.mark.parametrize("bad", [{"n": 1}, {"k": -1.0}])
    def test_parameter_domain(self, bad):
        with pytest.raises(cli.ConfigError):
            cli.resolve_config("roots", bad, {})

    def test_unknown_command(self):
        with pytest.raises(cli.ConfigError):
            cli.resolve_config("nope", None, {})


class TestExitCodes:
    def test_roots_ok(self, tmp_path, capsys):
        code, out = run(["roots"], tmp_path)
        assert code == cli.EXIT_OK
        printed = capsys.readouterr().out
        assert "alpha_-" in printed and "beta_+" in printed
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "roots" and manifest["n"] == 2

    def test_complex_roots_fail_claim(self, tmp_path):
        code, out = run(["roots", "--k", "5"], tmp_path)
        assert code == cli.EXIT_ASSERT
        assert json.loads((out / "report.json").read_text())["passed"] is False

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"command": "roots", "n": 3, "k": 0.5}))
        code, out = run(["roots", "--config", str(cfg)], tmp_path)
        assert code == cli.EXIT_OK
        assert json.loads((out / "manifest.json").read_text())["n"] == 3

    def test_bad_config_key(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        assert run(["roots", "--config", str(cfg)], tmp_path)[0] == cli.EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert run(["roots", "--config", str(tmp_path / "none.json")], tmp_path)[0] == cli.EXIT_CONFIG

    def test_odd_ntheta(self, tmp_path):
        assert run(["disk", "--Nr", "20", "--Ntheta", "31"], tmp_path)[0] == cli.EXIT_CONFIG

    def test_mean_in_parabolic_data(self, tmp_path):
        argv = ["perturb", "--base", "parabolic_ode", "--phi0", "[[0, 1.0], [1, 1.0]]"]
        assert run(argv, tmp_path)[0] == cli.EXIT_CONFIG

    def test_solver_error(self, tmp_path, capsys):
        code, _ = run(["hyperbolic", "--n", "8", "--T", "101", "--N", "2000", "--method", "newton"], tmp_path)
        assert code == cli.EXIT_SOLVER
        assert "solver error" in capsys.readouterr().err

    def test_failed_claim(self, tmp_path):
        # a coarse step leaves the discrete energy identity above its tolerance
        code, out = run(["hyperbolic", "--T", "10", "--N", "1000"], tmp_path)
        assert code == cli.EXIT_ASSERT
        assert "FAIL" in (out / "summary.txt").read_text()


class TestArtifacts:
    def test_parabolic_files(self, tmp_path):
        code, out = run(["parabolic", "--check-explicit"], tmp_path)
        assert code == cli.EXIT_OK
        for name in ("manifest.json", "report.json", "summary.txt"):
            assert (out / name).exists()
        report = json.loads((out / "report.json").read_text())
        for art in report["experiments"][0]["artifacts"]:
            assert (out / art).exists()
        gp = [a for a in report["experiments"][0]["artifacts"] if a.endswith(".gp")]
        assert gp and "pngcairo" in (out / gp[0]).read_text()

    def test_disk_dat_includes_pole(self, tmp_path):
        code, out = run(["disk", "--Nr", "20", "--Ntheta", "16", "--R", "6"], tmp_path)
        assert code in (cli.EXIT_OK, cli.EXIT_ASSERT)
        # one scan line per radius (pole included), each closing the angular period
        blocks = (out / "disk.dat").read_text().strip().split("\n\n")
        assert len(blocks) == 21
        first = np.array([ln.split() for ln in blocks[0].splitlines() if not ln.startswith("#")], float)
        assert first.shape == (17, 3) and np.all(first[:, :2] == 0.0)

    def test_perturb_csv(self, tmp_path):
        code, out = run(["perturb"], tmp_path)
        assert code == cli.EXIT_OK
        assert (out / "perturb.csv").read_text().splitlines()[0] == "x_or_r,y_or_theta,u"

    def test_deterministic(self, tmp_path):
        a = run(["perturb", "--base", "parabolic_ode"], tmp_path, "a")[1]
        b = run(["perturb", "--base", "parabolic_ode"], tmp_path, "b")[1]
        assert (a / "perturb.csv").read_bytes() == (b / "perturb.csv").read_bytes()

    def test_verify_subset(self, tmp_path, capsys):
        code, out = run(["verify-all", "--criteria", "[1]"], tmp_path)
        assert code == cli.EXIT_OK
        assert "[PASS]  1 explicit" in capsys.readouterr().out

    def test_verify_unknown_criterion(self, tmp_path):
        assert run(["verify-all", "--criteria", "[42]"], tmp_path)[0] == cli.EXIT_CONFIG


class TestReport:
    def test_empty(self, tmp_path):
        with pytest.raises(ValueError):
            cli.emit_report([], tmp_path)

    def test_single_row(self, tmp_path):
        res = cli.ExperimentResult("roots", [Claim(0, "x", 1.5, "< 2", True)])
        rpath, spath = cli.emit_report([res], tmp_path)
        lines = spath.read_text().splitlines()
        assert len(lines) == 3 and lines[2].split()[-1] == "PASS"
        assert json.loads(rpath.read_text())["passed"] is True

    def test_numpy_values_serialise(self, tmp_path):
        res = cli.ExperimentResult("roots", [Claim(0, "x", np.float64(0.1), "< 1", True)],
                                   {"arr": np.arange(3), "v": np.float32(2.0)})
        rpath, _ = cli.emit_report([res], tmp_path)
        assert json.loads(rpath.read_text())["experiments"][0]["data"]["arr"] == [0, 1, 2]

    def test_write_dat_blocks(self, tmp_path):
        A, B = np.meshgrid(np.arange(3.0), np.arange(2.0), indexing="ij")
        p = cli.write_dat(tmp_path / "s.dat", {"a": A, "b": B, "u": A + B}, blocks=2)
        body = p.read_text()
        assert body.count("\n\n") >= 2
