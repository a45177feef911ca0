"""Acceptance criteria, each reported on one PASS/FAIL line.

The eigenwavenumber and point-source runs take minutes; the property
suites take seconds.
"""

import numpy as np
import pytest

from axisym_nystrom import experiments as ex
from axisym_nystrom.assembly import Discretization
from axisym_nystrom.eigen import find_eigenwavenumber
from axisym_nystrom.experiments import RunConfig
from axisym_nystrom.geometry import sphere, star
from axisym_nystrom.oracles import sphere_bessel_reference

import property_checks as pc

SPHERE_K = 141.3575204174371
STAR_K = {1: 19.22942004015467, 2: 19.21873987061249}
STAR_BRACKET = {1: (19.1, 19.3), 2: (19.1, 19.3)}
STAR_PANELS = 26
POINT_SOURCE_SWEEP = (4, 6, 8, 10, 12, 14, 16, 20, 26, 32, 38)


@pytest.fixture
def report(capsys):
    def _report(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
        assert ok, detail
    return _report


@pytest.fixture(scope="module")
def point_source_sweep():
    cfg = RunConfig.from_dict({"kind": "convergence-sweep", "k": 19.0, "n": 1, "sweep": list(POINT_SOURCE_SWEEP),
                               "source": {"rc": 0.5, "z": 1.0, "strength": 5.0},
                               "window": {"subsample": 1000, "seed": 0}})
    return ex.run_point_source_experiment(cfg)


@pytest.mark.slow
def test_1_sphere_eigenwavenumber(report):
    oracle = sphere_bessel_reference(1, 45)
    disc = Discretization.build(sphere(), 16, N_ratio=12)
    res = find_eigenwavenumber(disc, 1, 141.34, 141.40)
    err = abs(res.k - SPHERE_K) / SPHERE_K
    err_oracle = abs(oracle - SPHERE_K) / SPHERE_K
    report(1, err <= 1e-13 and err_oracle <= 1e-13 and disc.grid.m == 256,
           f"k = {res.k:.16g}, rel err {err:.2e}; oracle {oracle:.16g}, rel err {err_oracle:.2e}")


@pytest.mark.parametrize("m, n_pan", [(1, 4), (2, 6), (3, 8)])
def test_2_sphere_low_modes(report, m, n_pan):
    ref = sphere_bessel_reference(1, m)
    disc = Discretization.build(sphere(), n_pan, N_ratio=4.0)
    res = find_eigenwavenumber(disc, 1, ref - 0.2, ref + 0.2)
    err = abs(res.k - ref) / ref
    report(2, err <= 1e-12, f"ell=1 m={m} at {n_pan} panels: k = {res.k:.16g}, rel err {err:.2e}")


@pytest.mark.slow
@pytest.mark.parametrize("n", [1, 2])
def test_3_star_eigenwavenumbers(report, n):
    disc = Discretization.build(star(), STAR_PANELS, N_ratio=4.0)
    res = find_eigenwavenumber(disc, n, *STAR_BRACKET[n])
    err = abs(res.k - STAR_K[n]) / STAR_K[n]
    report(3, err <= 1e-12, f"n={n} at {STAR_PANELS} panels: k = {res.k:.16g}, rel err {err:.2e}")


@pytest.mark.slow
def test_4_point_source_field(report, point_source_sweep):
    res = point_source_sweep
    row = res.table.rows[-1]
    avg = res.table.column("err_u")[-1]
    ok = row[0] == 38 and len(res.targets) == 1000 and avg <= 1e-12 and res.near_ratio <= 10
    report(4, ok, f"38 panels: average error {avg:.2e} on {len(res.targets)} points, "
                  f"near-boundary max / interior average = {res.near_ratio:.2f}")


@pytest.mark.slow
def test_5_convergence_order(report, point_source_sweep):
    t = point_source_sweep.table
    slope = ex.convergence_order(t.column("n_pan"), t.column("err_u"))
    errs = ", ".join(f"{int(p)}:{e:.1e}" for p, e in zip(t.column("n_pan"), t.column("err_u")))
    report(5, slope >= 14, f"fitted order {slope:.1f} ({errs})")


@pytest.mark.slow
def test_6_condition_number(report, point_source_sweep):
    cond = point_source_sweep.table.column("cond")[-1]
    report(6, 80 <= cond <= 160, f"star n=1 k=19 at 38 panels: cond = {cond:.1f}")


def test_7_property_suites(report):
    rng = np.random.default_rng(7)
    chim1 = np.concatenate([[1e-14, 1e-8, 1e-3], 10.0 ** rng.uniform(-12, -0.1, 8)])
    results = {
        "elliptic vs quadrature": (pc.check_elliptic(chim1), 1e-14),
        "forward/backward Q": (max(pc.check_forward_backward(rng.uniform(0.02, 0.5, 6), N)
                                   for N in (1, 4, 10)), 1e-12),
        "Q-route vs FFT-route": (max(pc.check_q_route(seed=s) for s in range(2)), 1e-11),
        "W_L/W_C exactness": (pc.check_weight_exactness([0.3, -0.8, 0.1 + 0.2j, 1.4, 0.02j, 3 - 1j]), 1e-13),
        "corrected-form equivalence": (max(pc.fix_equivalence(p, i, n_pan)
                                           for p, i, n_pan in ((0, 0, 8), (3, 7, 8), (15, 15, 16))), 1e-13),
        "Barnett vs area": (max(pc.check_barnett(m, 8) for m in (1, 2, 3)), 1e-8),
    }
    formula = _canonical_formula_error()
    results["canonical correction formulas"] = (formula, 1e-14)
    ok = all(v <= tol for v, tol in results.values())
    detail = "; ".join(f"{name} {v:.1e} (tol {tol:g})" for name, (v, tol) in results.items())
    report(7, ok, detail)


def _canonical_formula_error():
    from axisym_nystrom import quadrature
    from axisym_nystrom.geometry import gauss_legendre

    x, w = gauss_legendre(16)
    WL, WC = quadrature.canonical_matrices(16)
    ds = np.linspace(0.1, 0.3, 16)
    corr = quadrature.log_corrections_on_grid(16, ds)
    off = ~np.eye(16, dtype=bool)
    diff = np.abs(x[:, None] - x[None, :]) + np.eye(16)
    expected = WL / w[None, :] + np.where(off, -np.log(diff), np.log(ds)[:, None])
    tau_dot = np.ones((16, 16))
    curv = np.zeros(16)
    cmp = quadrature.cauchy_compensation_on_grid(16, tau_dot, curv)
    with np.errstate(divide="ignore"):
        cauchy = np.where(off, -(WC - w[None, :] / (x[None, :] - x[:, None] + np.eye(16))), -WC)
    return float(max(np.max(np.abs(corr - expected)), np.max(np.abs(cmp - cauchy))))
