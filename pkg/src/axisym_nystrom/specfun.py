"""Elliptic integrals, toroidal harmonics and related special functions.

The half-integer degree Legendre functions of the second kind are stored as
``q[n] = Q_{n-1/2}(chi)`` for ``n = 0..N`` (negative degrees follow from
``Q_{-n-1/2} = Q_{n-1/2}``).  Every routine takes ``chi - 1`` as an
independent input so that near-coincident point pairs keep full relative
accuracy in ``chi - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Threshold in ``chi`` separating forward (below) from backward recursion.
CHI_SWITCH = 1.008
#: Extra backward steps beyond ``N``.
BACKWARD_EXTRA = 80
#: Rescale the running backward pair above this magnitude.
RESCALE_LIMIT = 1e250

EULER_GAMMA = 0.57721566490153286061


class SpecialFunctionError(ArithmeticError):
    pass


def _agm_sum(b0sq, c0sq):
    """AGM of ``(1, sqrt(b0sq))`` and ``sum_n 2**(n-1) c_n**2`` with ``c_0**2 = c0sq``."""
    a = np.ones_like(b0sq)
    b = np.sqrt(b0sq)
    total = 0.5 * c0sq
    scale = 0.5
    for _ in range(64):
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), np.sqrt(a * b)
        scale *= 2.0
        total = total + scale * c * c
        # c stalls at rounding level instead of reaching zero; c**2 is negligible by then.
        if np.all(np.abs(c) <= 1e-9 * a):
            break
    return a, total


def elliptic_KE(m, m1=None):
    """Complete elliptic integrals ``K(m)``, ``E(m)`` in the parameter convention.

    ``K(m) = int_0^{pi/2} (1 - m sin^2)^{-1/2}``.  Pass the complementary
    parameter ``m1 = 1 - m`` when it is known more accurately than ``1 - m``;
    the iteration runs on ``m1`` so ``K`` keeps full relative accuracy as
    ``m -> 1``.  ``E`` is obtained without cancellation from the Legendre
    relation when ``m > 1/2``.
    """
    m = np.asarray(m, dtype=float)
    m1 = 1.0 - m if m1 is None else np.asarray(m1, dtype=float)
    m, m1 = np.broadcast_arrays(m, m1)
    if np.any(m1 <= 0) or np.any(m < 0):
        raise SpecialFunctionError("elliptic_KE requires 0 <= m < 1 and m1 > 0")
    agm, s = _agm_sum(m1, m)
    K = np.pi / (2 * agm)
    E = K * (1 - s)
    hi = m > 0.5
    if np.any(hi):
        agm_c, s_c = _agm_sum(m[hi], m1[hi])
        Kc = np.pi / (2 * agm_c)
        E = np.array(E, dtype=float, copy=True)
        E[hi] = (0.5 * np.pi + K[hi] * Kc * s_c) / Kc
    if K.ndim == 0:
        return float(K), float(E)
    return K, E


def _prepare_chi(chi, chim1):
    chi = np.asarray(chi, dtype=float)
    chim1 = chi - 1.0 if chim1 is None else np.asarray(chim1, dtype=float)
    chi, chim1 = np.broadcast_arrays(chi, chim1)
    if np.any(chim1 <= 0) or not np.all(np.isfinite(chi)):
        raise SpecialFunctionError("toroidal harmonics require chi > 1 (coincident points?)")
    return chi, chim1


def q_initial(chi, chim1=None):
    """``Q_{-1/2}(chi)`` and ``Q_{1/2}(chi)`` from complete elliptic integrals."""
    chi, chim1 = _prepare_chi(chi, chim1)
    m = 2.0 / (chim1 + 2.0)
    K, E = elliptic_KE(m, chim1 / (chim1 + 2.0))
    sm = np.sqrt(m)
    q0 = sm * K
    q1 = chi * q0 - 2.0 * E / sm
    return q0, q1


@dataclass(frozen=True)
class ToroidalHarmonicTable:
    """``Q[..., n] = Q_{n-1/2}(chi)`` and ``R[..., n]`` for ``n = 0..N``."""

    chi: np.ndarray
    chim1: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    backward: np.ndarray

    @property
    def N(self) -> int:
        return self.Q.shape[-1] - 1

    @property
    def method(self):
        if np.ndim(self.backward) == 0:
            return "backward" if self.backward else "forward"
        return np.where(self.backward, "backward", "forward")


def r_from_q(chi, Q):
    """``R_n = (2n-1)/(chi+1) (chi Q_{n-1/2} - Q_{n-3/2})`` for ``n = 0..N``.

    Needs ``N >= 1`` (``R_0`` uses ``Q_{-3/2} = Q_{1/2}``).
    """
    chi = np.asarray(chi, dtype=float)[..., None]
    Q = np.asarray(Q)
    if Q.shape[-1] < 2:
        raise SpecialFunctionError("r_from_q needs Q_{-1/2} and Q_{1/2}")
    prev = np.concatenate([Q[..., 1:2], Q[..., :-1]], axis=-1)
    n = np.arange(Q.shape[-1])
    return (2 * n - 1) / (chi + 1) * (chi * Q - prev)


def _forward_values(chi, q0, q1, N):
    out = np.empty(chi.shape + (max(N, 1) + 1,))
    out[..., 0] = q0
    out[..., 1] = q1
    for n in range(2, N + 1):
        out[..., n] = ((4 * n - 4) * chi * out[..., n - 1] - (2 * n - 3) * out[..., n - 2]) / (2 * n - 1)
    return out


def _backward_values(chi, q0, N, M, seeds):
    """Run the three-term recursion downward from ``M+2, M+1`` and normalize."""
    top = M + 2
    out = np.zeros(chi.shape + (top + 1,))
    out[..., top] = seeds[1]
    out[..., top - 1] = seeds[0]
    for n in range(top, 1, -1):
        val = ((4 * n - 4) * chi * out[..., n - 1] - (2 * n - 1) * out[..., n]) / (2 * n - 3)
        out[..., n - 2] = val
        big = np.abs(val) > RESCALE_LIMIT
        if np.any(big):
            out[big, n - 2:] /= RESCALE_LIMIT
    if np.any(out[..., 0] == 0) or not np.all(np.isfinite(out[..., 0])):
        raise SpecialFunctionError("backward recursion failed to produce a usable Q_{-1/2}")
    out = out * (q0 / out[..., 0])[..., None]
    return out[..., : max(N, 1) + 1]


def _table(chi, chim1, values, backward, N):
    R = r_from_q(chi, values)
    backward = np.broadcast_to(np.asarray(backward), chi.shape)
    return ToroidalHarmonicTable(chi, chim1, values[..., : N + 1], R[..., : N + 1], backward)


def legendre_q_forward(chi, N: int, chim1=None) -> ToroidalHarmonicTable:
    """Toroidal harmonics by forward recursion from the elliptic initializers."""
    chi, chim1 = _prepare_chi(chi, chim1)
    q0, q1 = q_initial(chi, chim1)
    return _table(chi, chim1, _forward_values(chi, q0, q1, N), False, N)


def legendre_q_backward(chi, N: int, M: int | None = None, chim1=None,
                        seeds=(1.0, 0.0)) -> ToroidalHarmonicTable:
    """Toroidal harmonics by backward (Miller) recursion started at ``M``.

    ``seeds`` are the (arbitrary) starting values for ``Q_{M+1/2}`` and
    ``Q_{M+3/2}``; the result is normalized so that ``Q_{-1/2}`` matches its
    elliptic-integral value.
    """
    chi, chim1 = _prepare_chi(chi, chim1)
    M = N + BACKWARD_EXTRA if M is None else int(M)
    if M <= N:
        raise SpecialFunctionError("backward recursion needs M > N")
    q0, _ = q_initial(chi, chim1)
    return _table(chi, chim1, _backward_values(chi, q0, N, M, seeds), True, N)


def _auto_start(chi, chim1, N):
    """Forward mask and backward start index from the recursion growth rates.

    The forward recursion amplifies rounding by about ``rho**n`` with
    ``rho = chi + sqrt(chi**2 - 1)``; backward recursion from ``M`` leaves an
    error near ``rho**(N - 2M)`` relative to ``Q_{-1/2}``.
    """
    log_rho = np.arccosh(chi) if np.all(chim1 > 1e-4) else np.log1p(chim1 + np.sqrt(chim1 * (chim1 + 2)))
    forward = N * log_rho <= 7.0
    lr = log_rho[~forward]
    if lr.size == 0:
        return forward, N + BACKWARD_EXTRA
    M = int(np.ceil(0.5 * (N + 38.0 / lr.min()))) + 8
    return forward, max(M, N + BACKWARD_EXTRA)


def legendre_q(chi, N: int, chim1=None, rule: str = "paper") -> ToroidalHarmonicTable:
    """Toroidal harmonics ``Q_{n-1/2}(chi)`` and ``R_n(chi)``, ``n = 0..N``.

    ``rule="paper"`` uses backward recursion with ``M = N + 80`` for
    ``chi >= 1.008`` and forward recursion below.  ``rule="auto"`` picks the
    method and start index from the growth rates so that the absolute error
    stays near machine precision for every ``n <= N``.
    """
    chi, chim1 = _prepare_chi(chi, chim1)
    if rule == "paper":
        forward = chi < CHI_SWITCH
        M = N + BACKWARD_EXTRA
    elif rule == "auto":
        forward, M = _auto_start(chi, chim1, N)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    q0, q1 = q_initial(chi, chim1)
    values = np.empty(chi.shape + (max(N, 1) + 1,))
    if np.any(forward):
        values[forward] = _forward_values(chi[forward], q0[forward], q1[forward], N)
    back = ~forward
    if np.any(back):
        values[back] = _backward_values(chi[back], q0[back], N, M, (1.0, 0.0))
    return _table(chi, chim1, values, back, N)


def r_forward(chi, N: int, chim1=None) -> np.ndarray:
    """``R_n`` by its own forward recursion (reference route only)."""
    chi, chim1 = _prepare_chi(chi, chim1)
    m = 2.0 / (chim1 + 2.0)
    K, E = elliptic_KE(m, chim1 / (chim1 + 2.0))
    sm = np.sqrt(m)
    out = np.empty(chi.shape + (max(N, 1) + 1,))
    out[..., 0] = -sm * E
    out[..., 1] = sm * (chim1 * K - chi * E)
    for n in range(2, N + 1):
        out[..., n] = ((4 * n - 4) * chi * out[..., n - 1] - (2 * n - 1) * out[..., n - 2]) / (2 * n - 3)
    return out[..., : N + 1]


def legendre_p_initial(chi, chim1=None):
    """``P_{-1/2}(chi)`` and ``P_{1/2}(chi)`` from complete elliptic integrals."""
    chi, chim1 = _prepare_chi(chi, chim1)
    m1 = chim1 / (chim1 + 2.0)
    K, E = elliptic_KE(m1, 2.0 / (chim1 + 2.0))
    p0 = (2 / np.pi) * np.sqrt(2.0 / (chi + 1)) * K
    p1 = (2 / np.pi) * (np.sqrt(2.0 * (chi + 1)) * E - np.sqrt(2.0 / (chi + 1)) * K)
    return p0, p1


def legendre_p(chi, N: int, chim1=None) -> np.ndarray:
    """``P_{n-1/2}(chi)``, ``n = 0..N``, by (stable) forward recursion."""
    chi, chim1 = _prepare_chi(chi, chim1)
    p0, p1 = legendre_p_initial(chi, chim1)
    return _forward_values(chi, p0, p1, N)[..., : N + 1]


def pochhammer(a, k: int):
    out = np.ones_like(np.asarray(a, dtype=float))
    for j in range(k):
        out = out * (a + j)
    return out


def hyper_2f1_truncated(a, b, x, terms: int = 4):
    """``2F1(a, b; 1; x)`` truncated after ``terms`` terms (four by default)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x)
    total = np.ones(np.broadcast(a, b, x).shape, dtype=np.result_type(x, float))
    term = np.ones_like(total)
    for k in range(terms - 1):
        term = term * (a + k) * (b + k) / ((k + 1) * (k + 1)) * x
        total = total + term
    return total


def hyper_2f1_series(a, b, c, x, tol: float = 1e-17, max_terms: int = 100000):
    """Gauss hypergeometric series ``2F1(a, b; c; x)`` summed to convergence, |x| < 1."""
    term = 1.0
    total = 1.0
    for k in range(max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * x
        total += term
        if abs(term) <= tol * abs(total) and k > 2:
            return total
    raise SpecialFunctionError("2F1 series did not converge")


def truncated_f_coefficients(n):
    """Coefficients ``c_k`` with ``2F1~(-n+1/2, n+1/2; x) = sum_k c_k x^k``."""
    n2 = np.asarray(n, dtype=float) ** 2
    c1 = 0.25 - n2
    c2 = c1 * (2.25 - n2) / 4.0
    c3 = c2 * (6.25 - n2) / 9.0
    return c1, c2, c3


_PSI_HALF = -EULER_GAMMA - 2.0 * math.log(2.0)


def digamma_half_integer(n):
    """``psi(n + 1/2)`` for non-negative integers ``n``."""
    n_arr = np.asarray(n)
    if np.any(n_arr < 0) or np.any(n_arr != np.floor(n_arr)):
        raise ValueError("digamma_half_integer needs non-negative integers")
    top = int(n_arr.max()) if n_arr.size else 0
    table = np.empty(top + 1)
    table[0] = _PSI_HALF
    acc = [_PSI_HALF]
    for k in range(1, top + 1):
        acc.append(2.0 / (2 * k - 1))
        table[k] = math.fsum(acc)
    out = table[n_arr.astype(int)]
    return float(out) if out.ndim == 0 else out


def q_remainder_diagonal(rc, n):
    """Diagonal value ``log(2 r_c) + psi(1) - psi(n + 1/2)`` of the smooth remainder."""
    return np.log(2.0 * np.asarray(rc))[..., None] - EULER_GAMMA - digamma_half_integer(np.abs(n))
