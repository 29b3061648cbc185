import json
import math

import pytest

from blc.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def write_problem(tmp_path, name, matrix, exponents=None, **extra):
    data = {"matrix": matrix}
    if exponents is not None:
        data["exponents"] = exponents
    data.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


WORKED = [[1, -1, 0], [0, 1, -1], [-1, 0, 1], [1, 0, 0], [0, 1, 0]]
YOUNG = [[1, 0], [-1, -1], [0, 1]]


def test_analyze_worked_example(tmp_path, capsys):
    path = write_problem(tmp_path, "w.json", WORKED)
    code, out = run(capsys, "analyze", path)
    assert code == 0
    rep = json.loads(out)
    assert rep["canonical"]["p"]["exact"] == ["2", "8/5", "8/5", "8/5", "8/5"]
    assert rep["polytope"]["vertex_count"] == 8
    assert rep["configuration"]["properly_redundant"]


def test_analyze_identity_warns(tmp_path, capsys):
    path = write_problem(tmp_path, "i.json", [[1, 0], [0, 1]])
    code, out = run(capsys, "analyze", path)
    assert code == 0
    rep = json.loads(out)
    assert rep["canonical"]["p"]["exact"] == ["1", "1"]
    assert rep["warnings"]
    assert rep["configuration"]["essential"] == [0, 1]


def test_analyze_non_spanning_exits_2(tmp_path, capsys):
    path = write_problem(tmp_path, "n.json", [[1, 0], [2, 0]])
    code, out = run(capsys, "analyze", path)
    assert code == 2
    rep = json.loads(out)
    assert rep["configuration"]["defects"]


def test_analyze_parse_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["analyze", str(path)]) == 1


def test_solve_sharp_young(tmp_path, capsys):
    path = write_problem(tmp_path, "y.json", YOUNG, ["3/2", "3/2", "3/2"])
    code, out = run(capsys, "solve", path)
    assert code == 0
    rep = json.loads(out)
    assert abs(rep["solution"]["d_value"] - math.sqrt(3) / 2) < 1e-8
    assert rep["optimizers"]["exists"]


def test_solve_boundary_route(tmp_path, capsys):
    path = write_problem(tmp_path, "b.json", WORKED, ["3/2", "3/2", "3/2", 2, 2])
    code, out = run(capsys, "solve", path)
    assert code == 0
    rep = json.loads(out)
    assert rep["solution"]["route"] == "boundary"
    assert abs(rep["solution"]["d_value"] - math.sqrt(3) / 2) < 1e-8
    assert rep["decomposition"]["critical_set"] == [0, 1, 2]
    assert rep["optimizers"]["exists"] is False
    assert rep["optimizers"]["failure_split"] == [0, 1, 2]


def test_solve_vertex_route_notes_infinite(tmp_path, capsys):
    path = write_problem(tmp_path, "v.json", WORKED, [1, 1, "inf", 1, "inf"])
    code, out = run(capsys, "solve", path)
    assert code == 0
    rep = json.loads(out)
    assert rep["solution"]["route"] == "boundary"
    assert "note" in rep["optimizers"]


def test_solve_supercritical_exits_3(tmp_path, capsys):
    path = write_problem(
        tmp_path, "s.json", WORKED, ["10/9", "10/9", "5/2", "5/2", "5/2"]
    )
    code, out = run(capsys, "solve", path)
    assert code == 3
    rep = json.loads(out)
    assert rep["polytope"]["supercritical_witness"] == [0, 1, 2]
    assert rep["solution"]["d_value"] == "inf"


def test_decompose_command(tmp_path, capsys):
    path = write_problem(tmp_path, "d.json", WORKED, ["3/2", "3/2", "3/2", 2, 2])
    code, out = run(capsys, "decompose", path)
    assert code == 0
    rep = json.loads(out)
    assert rep["decomposition"]["critical_set"] == [0, 1, 2]
    assert rep["decomposition"]["left"]["leaf_interior"]


def test_report_determinism(tmp_path, capsys):
    path = write_problem(tmp_path, "y.json", YOUNG, ["3/2", "3/2", "3/2"], seed=5)
    _, out1 = run(capsys, "solve", path)
    _, out2 = run(capsys, "solve", path)
    assert out1 == out2


def test_report_roundtrips(tmp_path, capsys):
    path = write_problem(tmp_path, "w.json", WORKED)
    _, out = run(capsys, "analyze", path)
    rep = json.loads(out)
    assert json.loads(json.dumps(rep)) == rep


def test_verify_sphere1_constants(capsys):
    code, out = run(capsys, "verify", "sphere1", "--constant-functions")
    assert code == 0
    assert json.loads(out)["passed"]


def test_verify_sphere1_random(capsys):
    code, out = run(capsys, "verify", "sphere1", "--trials", "4",
                    "--samples", "20000")
    assert code == 0


def test_verify_appendix(capsys):
    code, out = run(capsys, "verify", "appendix")
    assert code == 0
    rep = json.loads(out)
    assert rep["verification"]["overall_growth"] >= 2.0


def test_verify_sphere2_short(capsys):
    code, out = run(capsys, "verify", "sphere2", "--samples", "10000",
                    "--eps-schedule", "0.1,0.03")
    assert code == 0


def test_verify_heatflow_short_run_fails(capsys):
    # truncating the flow long before the limit leaves the ratio outside
    # the window: exit 4 with the failing invariant named
    code, out = run(
        capsys, "verify", "heatflow",
        "--t-max", "0.05", "--time-points", "4",
        "--profile-step", "0.01", "--xi-step", "0.1",
    )
    assert code == 4
    rep = json.loads(out)
    assert not rep["passed"]
    assert "limit_within_window" in rep["failing_invariants"]


def test_pretty_mode_renders(tmp_path, capsys):
    path = write_problem(tmp_path, "y.json", YOUNG, ["3/2", "3/2", "3/2"])
    code, out = run(capsys, "solve", path, "--pretty")
    assert code == 0
    assert "d_value" in out and "{" not in out.splitlines()[0]
