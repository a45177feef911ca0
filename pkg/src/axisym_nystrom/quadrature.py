"""Product-integration weights on the canonical panel ``[-1, 1]``.

For ``n`` Gauss-Legendre nodes ``x_j`` with weights ``w_j`` and a target
``z`` (real, or complex for points off the curve) we build

* log weights ``W_L(z)_j`` with ``sum_j W_L(z)_j p(x_j) = int p(x) log|x - z| dx``,
* Cauchy weights ``W_C(z)_j`` with ``sum_j W_C(z)_j p(x_j) = p.v. int p(x)/(x - z) dx``,

exact for polynomials of degree ``< n``.  Both come from Legendre moments of
the kernels, obtained by three-term recursion (forward close to the panel,
Miller's backward recursion further away).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import gauss_legendre

#: Bernstein radius above which the moment recursion runs backward.
BACKWARD_RHO = 1.1
#: Product integration is applied when the target's Bernstein radius is below this.
NEAR_RHO = 2.5
#: Largest node count for which the monomial-free Legendre construction is trusted.
MAX_CANONICAL_NODES = 40


class QuadratureError(ArithmeticError):
    pass


def bernstein_radius(z) -> np.ndarray:
    """``|z + sqrt(z - 1) sqrt(z + 1)|`` (>= 1), the ellipse through ``z``."""
    z = np.asarray(z, dtype=complex)
    w = z + np.sqrt(z - 1) * np.sqrt(z + 1)
    return np.maximum(np.abs(w), 1.0 / np.abs(w))


@lru_cache(maxsize=None)
def legendre_coefficient_matrix(n: int) -> np.ndarray:
    """``C[k, j] = (2k+1)/2 w_j P_k(x_j)``: nodal values to Legendre coefficients."""
    x, w = gauss_legendre(n)
    P = np.polynomial.legendre.legvander(x, n - 1).T
    C = (2 * np.arange(n)[:, None] + 1) / 2 * w[None, :] * P
    C.flags.writeable = False
    return C


def _q0(z):
    if np.isrealobj(z):
        return np.log(np.abs(1 - z)) - np.log(np.abs(1 + z))
    return np.log(1 - z) - np.log(-1 - z)


def _l0(z):
    if np.isrealobj(z):
        a, b = np.abs(1 - z), np.abs(1 + z)
        return a * np.log(a) * np.sign(1 - z) + b * np.log(b) * np.sign(1 + z) - 2
    return ((1 - z) * np.log(1 - z) - (-1 - z) * np.log(-1 - z)).real - 2


def cauchy_moments(z, count: int) -> np.ndarray:
    """``q_k(z) = int P_k(x) / (x - z) dx`` for ``k = 0..count-1`` (principal value on the panel).

    For real ``z`` the result is real.  Shape ``z.shape + (count,)``.
    """
    z = np.asarray(z)
    if not np.iscomplexobj(z):
        z = z.astype(float)
    if np.any(np.abs(z - 1) < 1e-14) or np.any(np.abs(z + 1) < 1e-14):
        raise QuadratureError("target coincides with a panel endpoint")
    out = np.empty(z.shape + (count,), dtype=z.dtype)
    q0 = _q0(z)
    rho = bernstein_radius(z)
    fwd = rho <= BACKWARD_RHO
    if np.any(fwd):
        zf = z[fwd]
        q = np.empty(zf.shape + (count,), dtype=z.dtype)
        q[..., 0] = q0[fwd]
        if count > 1:
            q[..., 1] = 2 + zf * q[..., 0]
        for k in range(1, count - 1):
            q[..., k + 1] = ((2 * k + 1) * zf * q[..., k] - k * q[..., k - 1]) / (k + 1)
        out[fwd] = q
    back = ~fwd
    if np.any(back):
        zb = z[back]
        extra = int(np.ceil(19.0 / np.log(rho[back].min()))) + 2
        top = count + extra
        q = np.zeros(zb.shape + (top + 2,), dtype=z.dtype)
        q[..., top] = 1e-200
        for k in range(top, 0, -1):
            q[..., k - 1] = ((2 * k + 1) * zb * q[..., k] - (k + 1) * q[..., k + 1]) / k
            big = np.abs(q[..., k - 1]) > 1e200
            if np.any(big):
                q[big] *= 1e-200
        out[back] = q[..., :count] * (q0[back] / q[..., 0])[..., None]
    return out


def log_moments(z, count: int) -> np.ndarray:
    """``L_k(z) = int P_k(x) log|x - z| dx`` for ``k = 0..count-1`` (real)."""
    z = np.asarray(z)
    q = cauchy_moments(z, count + 1)
    L = np.empty(z.shape + (count,))
    L[..., 0] = _l0(z)
    k = np.arange(1, count)
    L[..., 1:] = (-(q[..., 2:] - q[..., :-2]) / (2 * k + 1)).real
    return L


def log_weights(z, n: int) -> np.ndarray:
    """``W_L(z)``: weights for ``int p(x) log|x - z| dx`` at ``n`` Gauss nodes."""
    return log_moments(z, n) @ legendre_coefficient_matrix(n)


def cauchy_weights(z, n: int) -> np.ndarray:
    """``W_C(z)``: weights for ``p.v. int p(x) / (x - z) dx`` at ``n`` Gauss nodes."""
    return cauchy_moments(z, n) @ legendre_coefficient_matrix(n)


def log_corrections(z, n: int) -> np.ndarray:
    """``W_L(z)_j / w_j - log|z - x_j|`` for targets off the nodes."""
    x, w = gauss_legendre(n)
    z = np.asarray(z)
    dist = np.abs(z[..., None] - x)
    if np.any(dist == 0):
        raise QuadratureError("target coincides with a quadrature node; use the on-grid corrections")
    return log_weights(z, n) / w - np.log(dist)


def cauchy_compensation(z, n: int) -> np.ndarray:
    """Canonical part ``W_C(z)_j - w_j / (x_j - z)`` of the Cauchy compensation weights.

    The full compensation weight multiplies this by ``-(tau_0 . tau_j)``.
    """
    x, w = gauss_legendre(n)
    z = np.asarray(z)
    diff = x - z[..., None]
    if np.any(diff == 0):
        raise QuadratureError("target coincides with a quadrature node; use the on-grid corrections")
    return cauchy_weights(z, n) - w / diff


@lru_cache(maxsize=None)
def canonical_matrices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``W_L`` and ``W_C`` with targets at the panel's own nodes (row ``i`` = target ``x_i``)."""
    x, _ = gauss_legendre(n)
    WL = log_weights(np.array(x), n)
    WC = cauchy_weights(np.array(x), n)
    WL.flags.writeable = False
    WC.flags.writeable = False
    return WL, WC


@dataclass(frozen=True)
class CanonicalWeightMatrices:
    """Product-integration matrices with targets at the panel's own nodes (row ``i`` = target ``t_i``)."""

    nodes: np.ndarray
    WL: np.ndarray
    WC: np.ndarray


def build_canonical_matrices(nodes) -> CanonicalWeightMatrices:
    """``W_L`` and ``W_C`` for arbitrary distinct nodes in ``(-1, 1)``.

    Weights are Legendre moments mapped to nodal values through the
    Legendre-Vandermonde matrix of the nodes.
    """
    x = np.array(nodes, dtype=float)
    n = x.size
    if x.ndim != 1 or n < 1:
        raise QuadratureError("need a one-dimensional array of nodes")
    if n > MAX_CANONICAL_NODES:
        raise QuadratureError(f"{n} nodes exceed the well-conditioned limit {MAX_CANONICAL_NODES}")
    if np.any(np.abs(x) >= 1) or np.unique(x).size != n:
        raise QuadratureError("nodes must be distinct and inside (-1, 1)")
    V = np.polynomial.legendre.legvander(x, n - 1)
    to_weights = lambda moments: np.linalg.solve(V.T, moments.T).T
    WL = to_weights(log_moments(x, n))
    WC = to_weights(cauchy_moments(x, n))
    for a in (x, WL, WC):
        a.flags.writeable = False
    return CanonicalWeightMatrices(x, WL, WC)


@dataclass(frozen=True)
class NearWeights:
    """Per-target product-integration data for one source panel or leaf.

    ``log`` holds the corrections added to ``log|r - r_j|`` (shape
    targets by nodes); ``cauchy`` the compensation weights, or ``None`` when
    the kernel has no Cauchy part.  ``relation`` is ``"self"``,
    ``"neighbor"`` or ``"off-curve"``; ``x0`` are the targets' canonical
    coordinates.
    """

    x0: np.ndarray
    log: np.ndarray
    cauchy: np.ndarray | None
    relation: str


def log_corrections_on_grid(n: int, delta_s=None) -> np.ndarray:
    """Same-panel corrections between nodes.

    Off-diagonal ``W_L[i, j]/w_j - log|x_i - x_j|``; diagonal
    ``W_L[i, i]/w_i + log|delta s_i|`` where ``delta s_i`` is the panel
    half-width times the speed at node ``i`` (omitted when ``None``).
    """
    x, w = gauss_legendre(n)
    WL, _ = canonical_matrices(n)
    diff = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(diff, 1.0)
    corr = WL / w[None, :] - np.log(diff)
    if delta_s is not None:
        corr[np.diag_indices(n)] += np.log(np.abs(np.asarray(delta_s)))
    return corr


def cauchy_compensation_on_grid(n: int, tau_dot, curvature_term) -> np.ndarray:
    """Same-panel Cauchy compensation weights between nodes.

    ``tau_dot[i, j] = tau_i . tau_j``; ``curvature_term[i]`` is
    ``Re(zeta''_i / (2 zeta'_i)) w_i`` with derivatives in the curve parameter.
    """
    x, w = gauss_legendre(n)
    _, WC = canonical_matrices(n)
    diff = x[None, :] - x[:, None]
    np.fill_diagonal(diff, 1.0)
    cmp = -np.asarray(tau_dot) * (WC - w[None, :] / diff)
    cmp[np.diag_indices(n)] = -np.diag(WC) - np.asarray(curvature_term)
    return cmp
