import math

import numpy as np
import pytest
import scipy.special as sc
from hypothesis import given, strategies as st

from axisym_nystrom import specfun
from axisym_nystrom.specfun import SpecialFunctionError

import property_checks as pc

# (m, m1, K, E) from 40-digit mpmath.
ELLIPTIC_TABLE = [
    (0.5, 0.5, 1.8540746773013719184, 1.3506438810476755025),
    (0.1, 0.9, 1.6124413487202193982, 1.5307576368977632025),
    (0.9, 0.1, 2.5780921133481731882, 1.1047747327040733261),
    (0.999, 1e-3, 4.8411325605502970303, 1.0021707908344451659),
    (1 - 1e-8, 1e-8, 10.59663475708766032, 1.0000000504831738439),
    (1 - 1e-14, 1e-14, 17.504390012078251668, 1.000000000000085022),
]

# chi - 1 -> Q_{n-1/2}(chi) for n = 0, 1, 2, 5, 10, 40 (40-digit mpmath).
Q_ORDERS = (0, 1, 2, 5, 10, 40)
Q_TABLE = {
    1e-10: (13.245793416217019276, 11.245793416854308947, 10.579126751899511293,
            9.6711902549975150186, 8.9792824058476526537, 7.593378584803263728),
    1e-4: (6.3379714137292352639, 4.3382633107099694309, 3.6722723781449754824,
           2.7681187444030042313, 2.0868932202239860565, 0.82400575427848697226),
    0.005: (4.3799156892317312378, 2.3896130361380605929, 1.7421095720144241153,
            0.92262674190919692333, 0.42067462751292632585, 0.011169876051277827458),
    0.5: (2.0189058199784232156, 0.39317514837200473104, 0.11338169008453505689,
          0.0041745653916465122335, 0.000024377561438024631537, 3.5643763063299634609e-18),
    3.0: (1.1242019597966657589, 0.071541340536067285838, 0.00681982959347027149,
          9.1774056937562053943e-6, 2.17298003840467958e-10, 1.4322976370759843701e-37),
}


@pytest.mark.parametrize("m, m1, K, E", ELLIPTIC_TABLE)
def test_elliptic_frozen(m, m1, K, E):
    Kc, Ec = specfun.elliptic_KE(m, m1)
    assert Kc == pytest.approx(K, rel=1e-14)
    assert Ec == pytest.approx(E, rel=1e-14)


def test_elliptic_matches_scipy():
    m = np.linspace(0, 0.99, 50)
    K, E = specfun.elliptic_KE(m)
    np.testing.assert_allclose(K, sc.ellipk(m), rtol=1e-14)
    np.testing.assert_allclose(E, sc.ellipe(m), rtol=1e-14)


@given(st.floats(min_value=-15, max_value=-0.01))
def test_elliptic_vs_adaptive_quadrature(log_m1):
    assert pc.check_elliptic([10.0 ** log_m1]) <= 1e-14


def test_elliptic_rejects_m_one():
    with pytest.raises(SpecialFunctionError):
        specfun.elliptic_KE(1.0, 0.0)


@pytest.mark.parametrize("chim1", sorted(Q_TABLE))
def test_legendre_q_frozen(chim1):
    tab = specfun.legendre_q(1 + chim1, 40, chim1, rule="auto")
    ref = np.array(Q_TABLE[chim1])
    got = tab.Q[list(Q_ORDERS)]
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-13 * ref[0])
    np.testing.assert_allclose(got[:4], ref[:4], rtol=2e-14)


@pytest.mark.parametrize("chim1", [0.5, 3.0])
def test_backward_keeps_relative_accuracy_of_small_values(chim1):
    tab = specfun.legendre_q_backward(1 + chim1, 40, chim1=chim1)
    np.testing.assert_allclose(tab.Q[list(Q_ORDERS)], Q_TABLE[chim1], rtol=1e-13)


@given(st.floats(min_value=0.02, max_value=0.5), st.integers(min_value=1, max_value=10))
def test_forward_backward_agree_where_both_stable(chim1, N):
    assert pc.check_forward_backward([chim1], N) <= 1e-12


def test_paper_rule_dispatch():
    tab = specfun.legendre_q(np.array([1.0079, 1.008, 1.5]), 10, rule="paper")
    assert list(tab.method) == ["forward", "backward", "backward"]
    with pytest.raises(ValueError):
        specfun.legendre_q(1.5, 10, rule="nope")


def test_q_initial_small_separation_keeps_log_form():
    # Q_{-1/2}(chi) ~ log(8 / (chi - 1)) / sqrt(2) ... to leading order; check against mpmath value.
    q0, q1 = specfun.q_initial(1 + 1e-10, 1e-10)
    assert q0 == pytest.approx(Q_TABLE[1e-10][0], rel=1e-14)
    assert q1 == pytest.approx(Q_TABLE[1e-10][1], rel=1e-14)


@pytest.mark.parametrize("chim1", [0.003, 0.02, 0.2])
def test_r_routes_match_mpmath(chim1):
    import mpmath as mp

    with mp.workdps(40):
        chi = 1 + mp.mpf(chim1)
        Q = lambda n: mp.legenq(n - mp.mpf(1) / 2 if n >= 0 else -n - mp.mpf(1) / 2,
                                0, chi, type=3).real
        ref = np.array([float((2 * n - 1) / (chi + 1) * (chi * Q(n) - Q(n - 1))) for n in range(9)])
    tab = specfun.legendre_q_forward(1 + chim1, 8, chim1)
    np.testing.assert_allclose(tab.R, ref, rtol=0, atol=2e-13)
    np.testing.assert_allclose(specfun.r_forward(1 + chim1, 8, chim1), ref, rtol=0, atol=2e-13)


def test_q_rejects_coincident_points():
    with pytest.raises(SpecialFunctionError):
        specfun.legendre_q(1.0, 4, 0.0)


def test_legendre_p_matches_scipy_for_half_integer_degree():
    chi = np.array([1.01, 1.3, 2.0])
    P = specfun.legendre_p(chi, 6)
    for n in range(7):
        np.testing.assert_allclose(P[:, n], sc.lpmv(0, n - 0.5, chi), rtol=1e-12)


@given(st.floats(min_value=-0.5, max_value=0.5), st.integers(min_value=0, max_value=30))
def test_truncated_coefficients_match_pochhammer_form(x, n):
    c1, c2, c3 = specfun.truncated_f_coefficients(n)
    direct = specfun.hyper_2f1_truncated(-n + 0.5, n + 0.5, x)
    assert 1 + x * (c1 + x * (c2 + x * c3)) == pytest.approx(float(direct), rel=1e-14, abs=1e-14)


@pytest.mark.parametrize("a, b, x", [(-1.5, 2.5, 0.3), (0.5, 0.5, -0.4), (-2.5, 3.5, 0.1)])
def test_truncated_series_uses_squared_factorials(a, b, x):
    # With c = 1 the series of 2F1 has (1)_k k! = (k!)^2 in the denominator.
    full = specfun.hyper_2f1_truncated(a, b, x, terms=200)
    assert float(full) == pytest.approx(sc.hyp2f1(a, b, 1.0, x), rel=1e-13)
    assert float(full) == pytest.approx(specfun.hyper_2f1_series(a, b, 1.0, x), rel=1e-13)


def test_truncated_series_zero_argument():
    assert float(specfun.hyper_2f1_truncated(-3.5, 4.5, 0.0)) == 1.0


@given(st.integers(min_value=0, max_value=200))
def test_digamma_half_integer(n):
    assert specfun.digamma_half_integer(n) == pytest.approx(sc.digamma(n + 0.5), rel=1e-14, abs=1e-15)


@pytest.mark.parametrize("n", [0, 1, 3, 12])
def test_remainder_diagonal_is_the_coincidence_limit(n):
    # Q_{n-1/2}(chi) + log(d) * F~ tends to the diagonal value as d -> 0.
    import mpmath as mp

    rc, d = 0.7, 1e-8
    chim1 = d * d / (2 * rc * rc)
    with mp.workdps(40):
        q = float(mp.legenq(n - mp.mpf(1) / 2, 0, 1 + mp.mpf(chim1), type=3).real)
    limit = float(specfun.q_remainder_diagonal(rc, n)[0])
    T = chim1 / 2
    assert q + math.log(d) * float(specfun.hyper_2f1_truncated(-n + 0.5, n + 0.5, -T)) == pytest.approx(
        limit, abs=1e-12)
