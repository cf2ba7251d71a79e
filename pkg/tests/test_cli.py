"""End-to-end command line checks, run in process through main(argv)."""

import json

import pytest

from kimad.cli import main

QUICK_CFG = """\
[objective]
kind = quadratic
dim = 12
layers = 6,6
seed = 4

[bandwidth]
kind = constant
value = 2000
downlink = off

[run]
mode = kimad
gamma = 0.1
rounds = 8
t_budget_s = 1.0
t_comp_s = 0.1
seed = 11
"""


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "quick.cfg"
    path.write_text(QUICK_CFG)
    return path


class TestRun:
    def test_writes_records_and_reports(self, cfg_path, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert (out / "rounds.csv").exists()
        assert (out / "summary.json").exists()
        printed = capsys.readouterr().out
        assert printed.startswith("wrote ")
        assert "(8 rounds" in printed

    def test_repeat_runs_are_byte_identical(self, cfg_path, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["run", "--config", str(cfg_path), "--out", str(a)])
        main(["run", "--config", str(cfg_path), "--out", str(b)])
        assert (a / "rounds.csv").read_bytes() == (b / "rounds.csv").read_bytes()
        assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()

    def test_flag_overrides_reach_the_run(self, cfg_path, tmp_path):
        out = tmp_path / "out"
        rc = main(["run", "--config", str(cfg_path), "--out", str(out),
                   "--rounds", "3", "--mode", "ef21", "--seed", "123"])
        assert rc == 0
        with open(out / "summary.json") as fh:
            summary = json.load(fh)
        assert summary["rounds"] == 3
        assert summary["mode"] == "ef21"
        assert summary["master_seed"] == 123

    def test_missing_config_exits_2(self, tmp_path, capsys):
        rc = main(["run", "--config", str(tmp_path / "absent.cfg"),
                   "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "config error:" in capsys.readouterr().err

    def test_invalid_setting_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text(QUICK_CFG + "\n[workers]\ncount = 0\n")
        rc = main(["run", "--config", str(path), "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "config error:" in capsys.readouterr().err

    def test_diverging_run_exits_1(self, tmp_path, capsys):
        path = tmp_path / "diverge.cfg"
        path.write_text(QUICK_CFG.replace("gamma = 0.1", "gamma = 80")
                        .replace("rounds = 8", "rounds = 300"))
        rc = main(["run", "--config", str(path), "--out", str(tmp_path / "out")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_subcommand_is_a_usage_error(self):
        with pytest.raises(SystemExit):
            main([])


class TestSweep:
    def test_grid_outputs_and_best_k(self, cfg_path, tmp_path, capsys):
        out = tmp_path / "sweep"
        rc = main(["sweep", "--config", str(cfg_path), "--out", str(out),
                   "--k", "1,2", "--rounds", "5"])
        assert rc == 0
        assert (out / "rounds_k1.csv").exists()
        assert (out / "rounds_k2.csv").exists()
        with open(out / "sweep.json") as fh:
            sweep = json.load(fh)
        assert sorted(sweep["runs"]) == ["1", "2"]
        losses = {int(k): s["final_loss"] for k, s in sweep["runs"].items()}
        assert sweep["best_k"] == min(losses, key=losses.get)
        for s in sweep["runs"].values():
            assert s["mode"] == "ef21"
            assert s["rounds"] == 5
        assert f"best_k={sweep['best_k']}" in capsys.readouterr().out


class TestOracle:
    def problem(self, tmp_path, spec):
        path = tmp_path / "problem.json"
        path.write_text(json.dumps(spec))
        return str(path)

    def test_two_layer_reference_problem(self, tmp_path, capsys):
        path = self.problem(tmp_path, {
            "budget_bits": 15,
            "discretization": 15,
            "layers": [[[10, 5], [5, 9]], [[10, 4], [5, 7]]],
        })
        assert main(["oracle", "--problem", path]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["dp"]["choices"] == [0, 1]
        assert out["dp"]["total_error"] == 12.0
        assert out["dp"]["total_cost_bits"] == 15
        assert out["bruteforce"]["total_error"] == 12.0
        assert out["errors_agree"] is True

    def test_out_file(self, tmp_path, capsys):
        path = self.problem(tmp_path, {
            "budget_bits": 15,
            "discretization": 15,
            "layers": [[[10, 5], [5, 9]], [[10, 4], [5, 7]]],
        })
        dest = tmp_path / "answer.json"
        assert main(["oracle", "--problem", path, "--out", str(dest)]) == 0
        assert "wrote" in capsys.readouterr().out
        assert json.loads(dest.read_text())["errors_agree"] is True

    def test_malformed_json_exits_2(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        rc = main(["oracle", "--problem", str(path)])
        assert rc == 2
        assert "input error:" in capsys.readouterr().err

    def test_missing_key_exits_2(self, tmp_path, capsys):
        path = self.problem(tmp_path, {"layers": [[[10, 5]]]})
        rc = main(["oracle", "--problem", path])
        assert rc == 2
        assert "input error:" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path, capsys):
        rc = main(["oracle", "--problem", str(tmp_path / "absent.json")])
        assert rc == 2
        assert "input error:" in capsys.readouterr().err

    def test_infeasible_problem_exits_1(self, tmp_path, capsys):
        path = self.problem(tmp_path, {
            "budget_bits": 10,
            "layers": [[[100, 1.0]]],
        })
        rc = main(["oracle", "--problem", path])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestVerify:
    def test_all_checks_pass(self, capsys):
        assert main(["verify"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 5
        assert "FAIL" not in out
        assert "5/5 checks passed" in out.splitlines()[-1]


class TestLogging:
    def test_unknown_level_warns_and_continues(self, tmp_path, capsys,
                                               monkeypatch):
        monkeypatch.setenv("KIMAD_LOG", "banana")
        rc = main(["run", "--config", str(tmp_path / "absent.cfg"),
                   "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "KIMAD_LOG='banana' not understood" in capsys.readouterr().err

    def test_known_level_is_silent(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("KIMAD_LOG", "info")
        main(["run", "--config", str(tmp_path / "absent.cfg"),
              "--out", str(tmp_path / "out")])
        assert "not understood" not in capsys.readouterr().err
