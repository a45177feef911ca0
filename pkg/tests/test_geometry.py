import numpy as np
import pytest
from hypothesis import given, strategies as st

from axisym_nystrom.geometry import (GeometryError, Panel, build_mesh, curve_from_spec, gauss_legendre,
                                     panel_interpolation_matrix, refine_panel_binary, sphere, split_panel,
                                     star)


def test_star_derivatives_by_finite_differences(star_curve):
    t = np.linspace(0.1, 3.0, 7)
    h = 1e-6
    p_plus = np.array(star_curve.position(t + h))
    p_minus = np.array(star_curve.position(t - h))
    np.testing.assert_allclose((p_plus - p_minus) / (2 * h), np.array(star_curve.velocity(t)), atol=1e-8)
    v_plus = np.array(star_curve.velocity(t + h))
    v_minus = np.array(star_curve.velocity(t - h))
    np.testing.assert_allclose((v_plus - v_minus) / (2 * h), np.array(star_curve.acceleration(t)), atol=1e-7)


def test_star_endpoints_on_axis(star_curve):
    rc, z = star_curve.position(np.array([0.0, np.pi]))
    np.testing.assert_allclose(rc, 0.0, atol=1e-15)
    np.testing.assert_allclose(z, [1.25, -0.75])


def test_normal_is_outward_unit(star_curve):
    t = np.linspace(0.05, np.pi - 0.05, 40)
    nu_rc, nu_z = star_curve.normal(t)
    tau_rc, tau_z = star_curve.tangent(t)
    np.testing.assert_allclose(np.hypot(nu_rc, nu_z), 1.0)
    np.testing.assert_allclose(nu_rc * tau_rc + nu_z * tau_z, 0.0, atol=1e-15)
    # For a star-shaped body the position vector has a positive normal component.
    rc, z = star_curve.position(t)
    assert np.all(rc * nu_rc + z * nu_z > 0)


def test_sphere_grid_arclength():
    _, grid = build_mesh(sphere(), 5)
    assert np.sum(grid.nodes.s * grid.nodes.w) == pytest.approx(np.pi, rel=1e-15)
    assert sum(grid.panel_arclength(p) for p in range(5)) == pytest.approx(np.pi, rel=1e-15)


@pytest.mark.parametrize("n_pan", [1, 2, 17])
def test_mesh_sizes(star_curve, n_pan):
    panels, grid = build_mesh(star_curve, n_pan)
    assert len(panels) == n_pan
    assert grid.m == 16 * n_pan
    assert np.all(np.diff(grid.nodes.t) > 0)
    assert grid.neighbors(0) == ([0, 1] if n_pan > 1 else [0])


@pytest.mark.parametrize("n_pan", [0, -3, 2.5])
def test_mesh_rejects_bad_panel_count(star_curve, n_pan):
    with pytest.raises(GeometryError):
        build_mesh(star_curve, n_pan)


def test_star_rejects_large_amplitude():
    with pytest.raises(GeometryError):
        star(1.2)


def test_curve_from_spec():
    c = curve_from_spec({"name": "star", "amplitude": 0.1, "frequency": 3})
    assert c.params == {"amplitude": 0.1, "frequency": 3.0}
    assert curve_from_spec("sphere").name == "sphere"
    with pytest.raises(GeometryError):
        curve_from_spec({"name": "torus"})
    with pytest.raises(GeometryError):
        curve_from_spec({"name": "sphere", "radius": 2})


@pytest.mark.parametrize("direction", ["toward-start", "toward-end"])
def test_binary_refinement(direction):
    panel = Panel(0.0, 0.4)
    pieces = refine_panel_binary(panel, 11, direction)
    assert len(pieces) == 12
    assert pieces[0].t_a == 0.0 and pieces[-1].t_b == 0.4
    assert all(a.t_b == b.t_a for a, b in zip(pieces, pieces[1:]))
    end = pieces[0] if direction == "toward-start" else pieces[-1]
    assert end.t_b - end.t_a == pytest.approx(0.4 / 2 ** 11)


def test_binary_refinement_level_bounds():
    with pytest.raises(GeometryError):
        refine_panel_binary(Panel(0, 1), 12)
    assert refine_panel_binary(Panel(0, 1), 0) == [Panel(0, 1)]


def test_split_panel():
    parts = split_panel(Panel(1.0, 2.0), 4, 32)
    assert [p.t_a for p in parts] == [1.0, 1.25, 1.5, 1.75]
    assert all(p.n_pt == 32 for p in parts)


@given(st.lists(st.floats(min_value=-3, max_value=3), min_size=16, max_size=16),
       st.lists(st.floats(min_value=-1, max_value=1), min_size=1, max_size=20))
def test_interpolation_exact_for_degree_15(coefs, targets):
    x, _ = gauss_legendre(16)
    M = panel_interpolation_matrix(x, np.array(targets))
    vals = np.polynomial.legendre.legval(x, coefs)
    expected = np.polynomial.legendre.legval(np.array(targets), coefs)
    scale = max(1.0, np.sum(np.abs(coefs)))
    np.testing.assert_allclose(M @ vals, expected, atol=2e-13 * scale)


def test_interpolation_identity_at_nodes():
    x, _ = gauss_legendre(16)
    np.testing.assert_array_equal(panel_interpolation_matrix(x, x), np.eye(16))


def test_gauss_legendre_is_read_only():
    x, w = gauss_legendre(16)
    with pytest.raises(ValueError):
        x[0] = 0.0
    assert w.sum() == pytest.approx(2.0, rel=1e-15)
