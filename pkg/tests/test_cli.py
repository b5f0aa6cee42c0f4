import json

import numpy as np
import pytest

from ucpsolve.cli import export_controllers, main, write_report
from ucpsolve.grids import ControllerSet, SampledController, make_grid
from ucpsolve.solver import RoundReport, SolveResult


def _tiny_result():
    g = make_grid(-1, 1, 3)
    ctrl = SampledController(g, g.points.copy())
    rounds = (
        RoundReport(1, 0.5, 1.0, 0.25, 10, 10, 3.0, 0.75),
        RoundReport(2, 0.5, 0.0, 0.0, 19, 1, 2.0, 0.5),
    )
    return SolveResult(ControllerSet((ctrl, ctrl)), 0.5, rounds, "converged")


class TestExportControllers:
    def test_three_point_identity_body(self, tmp_path):
        paths = export_controllers(_tiny_result(), tmp_path)
        body = paths[0].read_text()
        assert body == "y,u\n-1,-1\n0,0\n1,1\n"

    def test_one_file_per_stage(self, tmp_path):
        paths = export_controllers(_tiny_result(), tmp_path)
        assert [p.name for p in paths] == ["controller_0.csv", "controller_1.csv"]

    def test_round_trip_is_bitwise(self, tmp_path):
        g = make_grid(-2.5, 7.1, 57)
        rng = np.random.default_rng(3)
        ctrl = SampledController(g, rng.normal(size=57) * np.pi)
        res = SolveResult(ControllerSet((ctrl,)), 1.0, (_tiny_result().rounds[0],), "converged")
        (path,) = export_controllers(res, tmp_path)
        rows = [line.split(",") for line in path.read_text().splitlines()[1:]]
        ys = np.array([float(r[0]) for r in rows])
        us = np.array([float(r[1]) for r in rows])
        assert np.array_equal(ys, g.points)
        assert np.array_equal(us, ctrl.values)


class TestWriteReport:
    def test_fields(self, tmp_path):
        path = write_report(_tiny_result(), tmp_path)
        doc = json.loads(path.read_text())
        assert doc["final_objective"] == 0.5
        assert doc["termination"] == "converged"
        assert doc["total_rounds"] == 2
        for rec in doc["rounds"]:
            assert rec["local_iters"] + rec["exhaustion_iters"] == 20
        assert doc["rounds"][1]["local_iters"] == 19


class TestSolveCommand:
    def test_quadratic_solve(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["solve", "--problem", "quadratic", "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "report.json").read_text())
        assert doc["termination"] == "converged"
        rows = (out / "controller_0.csv").read_text().splitlines()
        assert rows[0] == "y,u"
        assert len(rows) == 1 + 101
        ys, us = np.array([list(map(float, r.split(","))) for r in rows[1:]]).T
        assert np.max(np.abs(us - 2.0 * ys)) <= 1e-9

    def test_invalid_grid_names_field(self, tmp_path, capsys):
        code = main(["solve", "--problem", "quadratic", "--grid", "0:-5,5,1", "--out", str(tmp_path)])
        assert code == 1
        assert "grid.d" in capsys.readouterr().err

    def test_unknown_problem(self, tmp_path, capsys):
        code = main(["solve", "--problem", "tictactoe", "--out", str(tmp_path)])
        assert code == 1

    def test_unknown_solver_key(self, tmp_path, capsys):
        code = main(
            ["solve", "--problem", "quadratic", "--solver", "momentum=0.9", "--out", str(tmp_path)]
        )
        assert code == 1
        assert "momentum" in capsys.readouterr().err

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numeric_failure_exit_code(self, tmp_path, capsys):
        # an absurd finite-difference step overflows the cost evaluation
        code = main(
            [
                "solve", "--problem", "quadratic",
                "--solver", "fd_step=1e308",
                "--out", str(tmp_path),
            ]
        )
        assert code == 2
        assert "numeric failure" in capsys.readouterr().err

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = {
            "problem": "quadratic",
            "params": {"slope": 3.0},
            "grids": [[-5, 5, 41]],
            "solver": {"workers": 1},
            "output_dir": str(tmp_path / "from_file"),
        }
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "out"
        code = main(
            ["solve", "--config", str(cfg_path), "--param", "slope=2.0", "--out", str(out)]
        )
        assert code == 0
        rows = (out / "controller_0.csv").read_text().splitlines()[1:]
        assert len(rows) == 41  # grid from file
        ys, us = np.array([list(map(float, r.split(","))) for r in rows]).T
        assert np.max(np.abs(us - 2.0 * ys)) <= 1e-9  # slope from flag

    def test_unknown_config_field(self, tmp_path, capsys):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps({"problem": "quadratic", "goal": 1}))
        assert main(["solve", "--config", str(cfg_path)]) == 1
        assert "goal" in capsys.readouterr().err

    def test_determinism_across_runs(self, tmp_path):
        args = [
            "solve", "--problem", "witsenhausen",
            "--grid=-25,25,301",
            "--solver", "max_rounds=3", "--solver", "workers=1",
        ]
        main(args + ["--out", str(tmp_path / "a")])
        main(args + ["--out", str(tmp_path / "b")])
        for m in range(2):
            fa = (tmp_path / "a" / f"controller_{m}.csv").read_bytes()
            fb = (tmp_path / "b" / f"controller_{m}.csv").read_bytes()
            assert fa == fb
        ra = json.loads((tmp_path / "a" / "report.json").read_text())
        rb = json.loads((tmp_path / "b" / "report.json").read_text())

        def strip_wall(doc):
            doc = dict(doc)
            doc.pop("wall_ms_total")
            doc["rounds"] = [
                {k: v for k, v in rec.items() if k != "wall_ms"} for rec in doc["rounds"]
            ]
            return doc

        assert strip_wall(ra) == strip_wall(rb)


class TestCompareCommand:
    def test_emits_both_reports(self, tmp_path, capsys):
        out = tmp_path / "cmp"
        code = main(
            [
                "compare", "--problem", "witsenhausen",
                "--grid=-25,25,201",
                "--solver", "max_rounds=4", "--solver", "workers=1",
                "--out", str(out),
            ]
        )
        assert code == 0
        adaptive = json.loads((out / "adaptive" / "report.json").read_text())
        fixed = json.loads((out / "fixed_split" / "report.json").read_text())
        assert all(r["local_iters"] == 19 and r["exhaustion_iters"] == 1 for r in fixed["rounds"])
        assert adaptive["rounds"][0]["local_iters"] == 10


class TestPinCommand:
    def test_writes_fixture_file(self, tmp_path):
        out = tmp_path / "pins.json"
        assert main(["pin", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert {
            "wc_stage1_cost_closed_form",
            "zd_stage1_cost_cellwise",
            "inv_value_at_quarter",
            "inv_stage0_cost_core",
            "wc_stage1_bruteforce_argmin",
        } <= set(doc)
