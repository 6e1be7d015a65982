import json

import numpy as np
import pytest
from click.testing import CliRunner

from trefcap.cli import main
from trefcap.matio import import_matrix
from trefcap.oracle import exact_rect4

PLATE = """
[options]
box_width = 1.0
ground = 1
mesh_level = 0

[layer]
height = 1.0
epsilon_r = 1.0

[conductor]
interface = 0
x_offset = 0.0
width = 1.0

[conductor]
interface = 1
x_offset = 0.0
width = 1.0
"""


@pytest.fixture
def runner():
    return CliRunner()


class TestSolve:
    def test_rect_mesh(self, runner, tmp_path):
        mesh_file = tmp_path / "square.json"
        mesh_file.write_text(json.dumps({"rect": [0, 0, 1, 1], "splits": [1, 1, 1, 1]}))
        out = tmp_path / "c.csv"
        result = runner.invoke(
            main, ["solve", str(mesh_file), "-o", str(out), "--report-cond"]
        )
        assert result.exit_code == 0, result.output
        got = import_matrix(out)
        assert np.abs(got - exact_rect4(0, 0, 1, 1).C).max() < 1e-10
        assert "cond(G)" in result.output

    def test_explicit_elements(self, runner, tmp_path):
        mesh_file = tmp_path / "poly.json"
        mesh_file.write_text(
            json.dumps(
                {
                    "elements": [
                        {"nodes": [[0, 0], [1, 0]]},
                        {"nodes": [[1, 0], [1, 1]]},
                        {"nodes": [[1, 1], [0, 1]]},
                        {"nodes": [[0, 1], [0, 0]]},
                    ]
                }
            )
        )
        out = tmp_path / "c.json"
        result = runner.invoke(
            main, ["solve", str(mesh_file), "-o", str(out), "--format", "json"]
        )
        assert result.exit_code == 0, result.output
        assert import_matrix(out).shape == (4, 4)

    def test_bad_json_exits_2(self, runner, tmp_path):
        mesh_file = tmp_path / "bad.json"
        mesh_file.write_text("{not json")
        assert runner.invoke(main, ["solve", str(mesh_file)]).exit_code == 2

    def test_degenerate_mesh_exits_2(self, runner, tmp_path):
        mesh_file = tmp_path / "bad.json"
        mesh_file.write_text(json.dumps({"rect": [0, 0, -1, 1]}))
        assert runner.invoke(main, ["solve", str(mesh_file)]).exit_code == 2


class TestExtract:
    def test_parallel_plate(self, runner, tmp_path):
        prob = tmp_path / "plate.prob"
        prob.write_text(PLATE)
        out = tmp_path / "run"
        result = runner.invoke(
            main,
            ["extract", str(prob), "--out-dir", str(out), "--repeats", "1",
             "--report-cond"],
        )
        assert result.exit_code == 0, result.output
        matrix = import_matrix(out / "capacitance.csv")
        assert matrix[0, 0] == pytest.approx(8.854, abs=2e-3)
        assert (out / "geometry.png").exists()
        assert "N_n" in result.output and "cond(G)" in result.output

    def test_json_output_and_no_plot(self, runner, tmp_path):
        prob = tmp_path / "plate.prob"
        prob.write_text(PLATE)
        out = tmp_path / "run"
        result = runner.invoke(
            main,
            ["extract", str(prob), "--out-dir", str(out), "--format", "json",
             "--no-plot", "--repeats", "1"],
        )
        assert result.exit_code == 0, result.output
        assert (out / "capacitance.json").exists()
        assert not (out / "geometry.png").exists()

    def test_parse_error_exits_2(self, runner, tmp_path):
        prob = tmp_path / "bad.prob"
        prob.write_text("[options]\nbox_width = oops\n")
        result = runner.invoke(main, ["extract", str(prob)])
        assert result.exit_code == 2

    def test_numerical_error_exits_3(self, runner, tmp_path):
        # paths too close to separate at mesh_level 0
        prob = tmp_path / "tight.prob"
        prob.write_text(PLATE.replace("mesh_level = 0", "mesh_level = 0") + """
[conductor]
interface = 1
x_offset = 0.0
width = 0.0
""")
        # zero width is a parse error; use an unresolvable pair instead
        prob.write_text("""
[options]
box_width = 4.0
ground = 1
mesh_level = 0

[layer]
height = 1.0
epsilon_r = 1.0

[conductor]
interface = 0
x_offset = 0.5
width = 1.0

[conductor]
interface = 0
x_offset = 2.0
width = 1.0
""")
        result = runner.invoke(main, ["extract", str(prob), "--repeats", "1"])
        assert result.exit_code == 3
        assert "error" in result.output.lower()

    def test_io_error_exits_4(self, runner, tmp_path):
        prob = tmp_path / "plate.prob"
        prob.write_text(PLATE)
        blocker = tmp_path / "blocked"
        blocker.write_text("")  # out-dir path collides with a file
        result = runner.invoke(
            main, ["extract", str(prob), "--out-dir", str(blocker), "--repeats", "1"]
        )
        assert result.exit_code == 4


class TestBenchCommand:
    def test_bench_writes_table_and_figures(self, runner, tmp_path):
        prob = tmp_path / "plate.prob"
        prob.write_text(PLATE)
        out = tmp_path / "bench"
        result = runner.invoke(
            main,
            ["bench", str(prob), "--mesh-levels", "0,1", "--out-dir", str(out),
             "--repeats", "1"],
        )
        assert result.exit_code == 0, result.output
        assert (out / "bench.csv").exists()
        assert (out / "convergence.png").exists()
        assert (out / "timings.png").exists()
        table = (out / "bench.csv").read_text().strip().splitlines()
        assert len(table) == 3
        assert result.output.count("N_n") == 2  # one block per level


class TestVerify:
    def test_quick_suite_passes(self, runner):
        result = runner.invoke(main, ["verify", "--quick"])
        assert result.exit_code == 0, result.output
        assert "FAIL" not in result.output
        assert "checks passed" in result.output
