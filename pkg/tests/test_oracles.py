import numpy as np
import pytest
import scipy.special as sc
from hypothesis import given, strategies as st

from axisym_nystrom import oracles
from axisym_nystrom.geometry import build_mesh, sphere
from axisym_nystrom.oracles import OracleError, PointSource

# Roots of j_1' from 40-digit mpmath.
J1P_ROOTS = {1: 2.0815759778181006, 2: 5.9403699905727125, 3: 9.2058401429366649, 45: 141.3575204174371}


@given(st.integers(min_value=0, max_value=30), st.floats(min_value=0.01, max_value=200.0))
def test_spherical_bessel_matches_scipy(ell, x):
    ref = sc.spherical_jn(ell, x)
    assert oracles.spherical_bessel_j(ell, x) == pytest.approx(ref, rel=1e-11, abs=1e-15)


@pytest.mark.parametrize("m, root", sorted(J1P_ROOTS.items()))
def test_frozen_roots(m, root):
    assert oracles.sphere_bessel_reference(1, m) == pytest.approx(root, rel=1e-13)


@pytest.mark.parametrize("ell, m", [(0, 1), (2, 1), (3, 4)])
def test_roots_are_zeros_of_derivative(ell, m):
    x = oracles.sphere_bessel_reference(ell, m)
    assert abs(sc.spherical_jn(ell, x, derivative=True)) < 1e-13


@pytest.mark.parametrize("ell, m", [(-1, 1), (1, 0)])
def test_invalid_indices(ell, m):
    with pytest.raises(OracleError):
        oracles.sphere_bessel_reference(ell, m)


@pytest.mark.parametrize("m", [1, 3])
def test_sphere_field_trace_equals_profile(m):
    k = oracles.sphere_bessel_reference(1, m)
    t = np.linspace(0.0, np.pi, 9)
    trace = oracles.sphere_eigenfunction_field(k, np.sin(t), np.cos(t))
    np.testing.assert_allclose(trace, oracles.sphere_eigenfunction_profile(k, t), atol=1e-13)


def test_sphere_field_solves_helmholtz():
    k = oracles.sphere_bessel_reference(1, 2)
    rc, z, h = 0.4, 0.2, 1e-3
    u = lambda a, b: oracles.sphere_eigenfunction_field(k, a, b)
    lap = ((u(rc + h, z) - 2 * u(rc, z) + u(rc - h, z)) / h ** 2 + (u(rc + h, z) - u(rc - h, z)) / (2 * h * rc)
           + (u(rc, z + h) - 2 * u(rc, z) + u(rc, z - h)) / h ** 2 - u(rc, z) / rc ** 2)
    assert abs(lap + k * k * u(rc, z)) < 1e-4 * k * k * abs(u(rc, z))


def test_zero_strength_source_is_silent():
    _, grid = build_mesh(sphere(), 2)
    u, un, ut = PointSource(0.2, 1.5, 0.0).boundary_data(grid, 2.0, 1)
    assert not np.any(u) and not np.any(un) and not np.any(ut)


def test_reference_oracle_sphere():
    oracle = oracles.ReferenceOracle("sphere-analytic", ell=1, m=2)
    assert oracle.eigenwavenumber() == pytest.approx(J1P_ROOTS[2], rel=1e-13)
    u = oracle.field(np.array([0.3]), np.array([0.1]))
    assert u[0] == oracles.sphere_eigenfunction_field(J1P_ROOTS[2], 0.3, 0.1)
    with pytest.raises(OracleError):
        oracle.field(0.3, 0.1, n=2)


def test_reference_oracle_point_source():
    src = PointSource(0.5, 1.0, 5.0)
    oracle = oracles.ReferenceOracle("point-source", source=src)
    np.testing.assert_array_equal(oracle.field([0.2], [0.1], 3.0, 1), src.field([0.2], [0.1], 3.0, 1))
    with pytest.raises(OracleError):
        oracle.eigenwavenumber()
    with pytest.raises(OracleError):
        oracle.field(0.2, 0.1)


@pytest.mark.parametrize("kw", [{"kind": "plane-wave"}, {"kind": "point-source"}])
def test_reference_oracle_validation(kw):
    with pytest.raises(OracleError):
        oracles.ReferenceOracle(**kw)
