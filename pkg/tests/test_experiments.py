import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from axisym_nystrom import experiments as ex
from axisym_nystrom.experiments import ConfigError, ConvergenceTable, RunConfig
from axisym_nystrom.geometry import build_mesh

SMALL_WINDOW = {"nx": 24, "nz": 24, "subsample": None}


def _ps(**kw):
    base = {"kind": "solve", "k": 3.0, "n_pan": 4, "window": SMALL_WINDOW}
    base.update(kw)
    return RunConfig.from_dict(base)


@pytest.mark.parametrize("bad, message", [
    ({"kind": "nope"}, "kind"),
    ({"kind": ["solve", "field-grid"]}, "kind"),
    ({"n_pan": 0}, "n_pan"),
    ({"n_pan": 2.5}, "n_pan"),
    ({"n": 30}, "exceeds"),
    ({"N_ratio": -1}, "N_ratio"),
    ({"k": None}, "wavenumber"),
    ({"k": -2.0}, "k"),
    ({"bracket": [19.1, 19.3]}, "either"),
    ({"source": {"rc": 0.2, "z": 0.1}}, "outside"),
    ({"source": {"rc": 0.0, "z": 2.0}}, "positive"),
    ({"curve": {"name": "torus"}}, "curve"),
    ({"window": {"x": [1.0, -1.0]}}, "window"),
    ({"frobnicate": 1}, "unknown"),
    ({"source": {"rc": 1.0, "zz": 2.0}}, "source"),
])
def test_config_validation(bad, message):
    with pytest.raises(ConfigError, match=message):
        _ps(**bad)


@pytest.mark.parametrize("sweep", [[4, 4], [6, 4], [], [0, 2]])
def test_sweep_validation(sweep):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"kind": "convergence-sweep", "k": 3.0, "sweep": sweep})


def test_eigensearch_needs_bracket():
    with pytest.raises(ConfigError, match="bracket"):
        RunConfig.from_dict({"kind": "eigensearch", "n_pan": 4})
    with pytest.raises(ConfigError, match="bracket"):
        RunConfig.from_dict({"kind": "eigensearch", "n_pan": 4, "bracket": [2.0, 1.0]})


def test_config_round_trip(tmp_path):
    import json
    cfg = _ps(source={"rc": 0.5, "z": 1.0, "strength": 2.0})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert RunConfig.from_json(path) == cfg
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        RunConfig.from_json(path)
    with pytest.raises(ConfigError, match="cannot read"):
        RunConfig.from_json(tmp_path / "missing.json")


@given(st.one_of(st.integers(min_value=-10 ** 12, max_value=10 ** 12),
                 st.floats(allow_nan=False, allow_infinity=False)))
def test_format_value_round_trips(v):
    s = ex.format_value(v)
    assert float(s) == v
    if isinstance(v, int):
        assert s == str(v)


def test_export_round_trip(tmp_path):
    table = ConvergenceTable(("n_pan", "cond"), [(4, 1 / 3), (8, math.pi)])
    path = ex.export(table, tmp_path / "t.csv")
    text = path.read_text().splitlines()
    assert text[0] == "n_pan,cond"
    assert text[1] == "4,0.33333333333333331"
    header, data = ex.read_csv(path)
    assert header == ["n_pan", "cond"]
    assert data[1, 1] == math.pi


def test_export_empty_table_keeps_header(tmp_path):
    path = ex.export(ConvergenceTable(ex.TABLE_COLUMNS), tmp_path / "e.csv")
    assert path.read_text() == ",".join(ex.TABLE_COLUMNS) + "\n"
    header, data = ex.read_csv(path)
    assert data.shape == (0, 5)


def test_export_to_missing_directory_raises(tmp_path):
    with pytest.raises(OSError):
        ex.export(ConvergenceTable(("a",)), tmp_path / "nope" / "t.csv")


@pytest.mark.parametrize("order", [4.0, 14.0, 20.0])
def test_convergence_order_recovers_power_law(order):
    n_pan = np.array([4, 6, 8, 12, 16, 24])
    err = 3.0 * n_pan ** -order
    assert ex.convergence_order(n_pan, err) == pytest.approx(order, rel=1e-10)


def test_convergence_order_stops_at_floor():
    n_pan = np.array([4, 8, 16, 32, 64])
    err = np.maximum(n_pan ** -10.0, 1e-14)
    assert ex.convergence_order(n_pan, err) == pytest.approx(10.0, rel=0.05)
    with pytest.raises(ValueError):
        ex.convergence_order([4], [1e-3])


@given(st.lists(st.floats(min_value=-3, max_value=3), min_size=4, max_size=4),
       st.lists(st.floats(min_value=0.0, max_value=np.pi), min_size=1, max_size=10))
def test_interpolate_on_curve_is_exact_for_cubics(star_curve, coefs, t):
    _, grid = build_mesh(star_curve, 3)
    poly = np.polynomial.Polynomial(coefs)
    got = ex.interpolate_on_curve(grid, poly(grid.nodes.t), np.array(t))
    np.testing.assert_allclose(got, poly(np.array(t)), atol=1e-12 * (1 + np.sum(np.abs(coefs))))


def test_point_source_experiment_table():
    res = ex.run_point_source_experiment(_ps(kind="convergence-sweep", n_pan=None, sweep=[4, 8]))
    assert res.table.columns[:5] == ex.TABLE_COLUMNS
    assert list(res.table.column("n_pan")) == [4, 8]
    assert list(res.table.column("points")) == [64, 128]
    assert np.all(np.isnan(res.table.column("err_k")))
    err = res.table.column("err_u")
    assert err[1] < 1e-2 * err[0]
    assert len(res.grid.rows) == len(res.targets)


def test_zero_strength_source_gives_zero_errors():
    res = ex.run_point_source_experiment(_ps(source={"rc": 0.5, "z": 1.0, "strength": 0.0}))
    row = res.table.rows[0]
    assert row[4] == 0.0 and row[5] == 0.0 and row[6] == 0.0 and row[7] == 0.0
    assert not np.any(res.grid.u)


def test_field_records_mirror_the_mode():
    res = ex.run_point_source_experiment(_ps(n=1))
    left = res.grid.rc < 0
    assert np.any(left)
    # Modal values are even in x, so the plane field of an odd mode is odd.
    from axisym_nystrom.field import eval_field, FieldGrid
    curve = RunConfig.from_dict({"kind": "solve", "k": 3.0, "n_pan": 4}).build_curve()
    pts = FieldGrid.from_points(curve, [0.3, -0.3], [0.1, 0.1])
    u = eval_field(res.solution, pts) * ex._azimuthal_factor(pts, 1)
    assert u[0] == pytest.approx(-u[1], rel=1e-14)


def test_finer_mesh():
    assert [ex.finer_mesh(n) for n in (1, 2, 4, 26)] == [2, 3, 6, 39]


def test_sphere_eigen_experiment_uses_analytic_profile():
    cfg = RunConfig.from_dict({"kind": "convergence-sweep", "curve": {"name": "sphere"}, "sweep": [4, 6],
                                "bracket": [1.9, 2.3], "sphere_index": [1, 1], "window": SMALL_WINDOW})
    res = ex.run_eigen_experiment(cfg)
    assert res.reference is None
    assert np.all(res.table.column("err_k") < 1e-12)
    assert np.all(res.table.column("err_u") < 1e-6)
