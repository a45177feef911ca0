import io
import json

import pytest

from axisym_nystrom import cli
from axisym_nystrom.experiments import read_csv


def run(argv):
    out = io.StringIO()
    code = cli.main(argv, out)
    return code, out.getvalue()


def test_oracle_sphere_values():
    code, text = run(["oracle", "sphere-analytic", "--ell", "1", "--m", "1", "45"])
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == "ell,m,k"
    assert lines[2] == "1,45,141.35752041743712"


def test_oracle_point_source_needs_points():
    assert run(["oracle", "point-source"])[0] == 2
    code, text = run(["oracle", "point-source", "--points", "0.2", "0.1", "--k", "3"])
    assert code == 0 and text.splitlines()[0] == "r_c,z,Re,Im"


def test_solve_writes_boundary_csv(tmp_path):
    path = tmp_path / "b.csv"
    code, _ = run(["solve", "--k", "3", "--n-pan", "4", "--boundary", str(path)])
    assert code == 0
    header, data = read_csv(path)
    assert header == list(cli.BOUNDARY_COLUMNS)
    assert data.shape == (64, 8)


def test_sweep_from_json_config(tmp_path):
    cfg = {"kind": "convergence-sweep", "k": 3.0, "sweep": [4, 6],
           "window": {"nx": 20, "nz": 20, "subsample": None}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    table = tmp_path / "t.csv"
    code, _ = run(["sweep", "--config", str(path), "--table", str(table)])
    assert code == 0
    header, data = read_csv(table)
    assert header[:5] == ["n_pan", "points", "cond", "err_k", "err_u"]
    assert list(data[:, 0]) == [4, 6]


@pytest.mark.parametrize("argv", [
    ["solve", "--k", "3", "--n-pan", "4", "--source", "0.2", "0.1", "5"],
    ["sweep", "--k", "3", "--sweep", "6", "4"],
    ["solve", "--n-pan", "4"],
    ["eigensearch", "--n-pan", "4"],
    ["solve", "--k", "3", "--n-pan", "4", "--bogus"],
    ["frobnicate"],
    ["solve", "--k", "3", "--n-pan", "1", "--n", "9"],
])
def test_configuration_errors_exit_2(argv):
    assert run(argv)[0] == 2


def test_kind_mismatch_exit_2(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"kind": "eigensearch", "bracket": [1, 2], "n_pan": 2}))
    assert run(["solve", "--config", str(path)])[0] == 2
    path.write_text("[1, 2]")
    assert run(["solve", "--config", str(path)])[0] == 2


def test_monotone_bracket_exit_3():
    # cond has no interior peak near k = 1 on the sphere.
    code, _ = run(["eigensearch", "--curve", "sphere", "--n-pan", "2", "--bracket", "1.0", "1.2",
                   "--no-estimate"])
    assert code == 3


def test_unwritable_output_exit_4(tmp_path):
    code, _ = run(["solve", "--k", "3", "--n-pan", "2", "--boundary", str(tmp_path / "no" / "b.csv")])
    assert code == 4
