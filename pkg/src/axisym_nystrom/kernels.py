"""Helmholtz kernels on bodies of revolution and their azimuthal Fourier modes.

The three-dimensional kernels are written as ``S = Z (H1 + i H2)`` and
``K_mu = D_mu (H3 + i H4)`` where ``Z`` and ``D_mu`` are the Laplace kernels
and ``H1..H4`` are smooth functions of ``kR``.  Modal coefficients are

    G_n(r, r') = (2 pi)^{-1/2} int_{-pi}^{pi} exp(-i n phi) G(r, r', phi) d phi

and are computed either by the trapezoidal rule in ``phi`` on ``2N+1``
equispaced points (the FFT route) or, for the Laplace parts, through the
toroidal harmonics ``Q_{n-1/2}(chi)`` (the Q route).  Coefficient arrays of
all modes are stored *centred*: index ``n + N`` holds mode ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import specfun

SQRT_2PI = np.sqrt(2 * np.pi)
INV_4PI = 1.0 / (4 * np.pi)


@dataclass(frozen=True)
class Points:
    """Points in the half-plane, optionally with unit normals."""

    rc: np.ndarray
    z: np.ndarray
    nu_rc: np.ndarray | None = None
    nu_z: np.ndarray | None = None

    @classmethod
    def from_nodes(cls, nodes, index=None) -> "Points":
        nu_rc, nu_z = nodes.nu
        sel = slice(None) if index is None else index
        return cls(nodes.rc[sel], nodes.z[sel], nu_rc[sel], nu_z[sel])

    @property
    def tau(self):
        return self.nu_z, -self.nu_rc

    def take(self, index) -> "Points":
        pick = lambda a: None if a is None else np.asarray(a)[index]
        return Points(pick(self.rc), pick(self.z), pick(self.nu_rc), pick(self.nu_z))


def azimuthal_nodes(N: int) -> np.ndarray:
    """Trapezoidal nodes ``theta_m = 2 pi m / (2N+1)``, ``m = -N..N``."""
    return 2 * np.pi * np.arange(-N, N + 1) / (2 * N + 1)


# ---------------------------------------------------------------------------
# Smooth radial factors
# ---------------------------------------------------------------------------

def _h4_over_cube(x):
    """``(sin x - x cos x) / x**3`` without cancellation."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 0.5
    xs = x[small] ** 2
    # sum_{j>=1} (-1)^(j+1) 2j/(2j+1)! x^(2j-2)
    series = np.zeros_like(xs)
    for j in range(9, 0, -1):
        coef = (-1) ** (j + 1) * 2 * j / float(np.prod(np.arange(1, 2 * j + 2)))
        series = series * xs + coef
    out[small] = series
    xl = x[~small]
    out[~small] = (np.sin(xl) - xl * np.cos(xl)) / xl ** 3
    return out


def radial_factors(k: float, R):
    """``H1..H4`` as functions of ``kR``."""
    x = k * np.asarray(R)
    c, s = np.cos(x), np.sin(x)
    return c, s, c + x * s, s - x * c


def separation(target: Points, source: Points, phi):
    """``R`` and the pieces of ``r - r'(phi)`` in three dimensions.

    Returns ``(R, drc_phi, dz)`` where ``drc_phi = r_c - r_c' cos phi``.
    Arrays broadcast as ``target, source, phi``.
    """
    rc, z = target.rc, target.z
    rcs, zs = source.rc, source.z
    half = np.sin(0.5 * phi) ** 2
    drc = rc - rcs
    dz = z - zs
    R2 = drc ** 2 + dz ** 2 + 4 * rc * rcs * half
    return np.sqrt(R2), drc + 2 * rcs * half, dz


def full_kernels_3d(target: Points, source: Points, phi, k: float, which=("S", "Knu", "Ktau")):
    """Values of ``S``, ``K_nu`` and ``K_tau`` at azimuthal angle ``phi``.

    ``K_nu`` and ``K_tau`` use the normal and tangent of the target point.
    """
    R, drc, dz = separation(target, source, phi)
    x = k * R
    c, s = np.cos(x), np.sin(x)
    out = {}
    if "S" in which:
        out["S"] = INV_4PI * (c + 1j * s) / R
    if "Knu" not in which and "Ktau" not in which:
        return out
    h3 = c + x * s
    h4_r3 = k ** 3 * _h4_over_cube(x)
    for name in ("Knu", "Ktau"):
        if name in which:
            m_rc, m_z = (target.nu_rc, target.nu_z) if name == "Knu" else target.tau
            proj = m_rc * drc + m_z * dz
            out[name] = -INV_4PI * proj * (h3 / R ** 3 + 1j * h4_r3)
    return out


def smooth_products_3d(target: Points, source: Points, phi, k: float):
    """The smooth azimuthal integrands ``Z H2``, ``D_nu H4`` and ``D_tau H4``."""
    R, drc, dz = separation(target, source, phi)
    x = k * R
    zh2 = INV_4PI * k * np.sinc(x / np.pi)
    h4_r3 = k ** 3 * _h4_over_cube(x)
    nu_rc, nu_z = target.nu_rc, target.nu_z
    dnu = -INV_4PI * (nu_rc * drc + nu_z * dz) * h4_r3
    dtau = -INV_4PI * (nu_z * drc - nu_rc * dz) * h4_r3
    return zh2, dnu, dtau


# ---------------------------------------------------------------------------
# Azimuthal transforms
# ---------------------------------------------------------------------------

def modal_transform_fft(values) -> np.ndarray:
    """All modes ``-N..N`` of samples at :func:`azimuthal_nodes` (last axis).

    Returns a centred array: entry ``n + N`` is ``g_n``.
    """
    values = np.asarray(values)
    P = values.shape[-1]
    if P % 2 == 0:
        raise ValueError("trapezoidal transform needs an odd number 2N+1 of samples")
    # Samples are ordered m = -N..N; ifftshift puts m = 0 first.
    coef = np.fft.fft(np.fft.ifftshift(values, axes=-1), axis=-1)
    return np.fft.fftshift(coef, axes=-1) * (SQRT_2PI / P)


def mode_weights(n: int, N: int) -> np.ndarray:
    """Row vector mapping samples at :func:`azimuthal_nodes` to mode ``n``."""
    theta = azimuthal_nodes(N)
    return np.exp(-1j * n * theta) * (SQRT_2PI / (2 * N + 1))


def convolve_truncated(g, h, n: int) -> np.ndarray:
    """``(gh)_n = (2 pi)^{-1/2} sum_m g_m h_{n-m}`` over the stored modes.

    ``g`` and ``h`` are centred arrays of modes ``-N..N`` on the last axis;
    the sum runs over ``max(n-N, -N) <= m <= min(N, N+n)``.
    """
    g = np.asarray(g)
    h = np.asarray(h)
    N = (g.shape[-1] - 1) // 2
    if abs(n) > 2 * N:
        return np.zeros(np.broadcast_shapes(g.shape[:-1], h.shape[:-1]), dtype=np.result_type(g, h))
    m = np.arange(max(n - N, -N), min(N, N + n) + 1)
    return np.einsum("...m,...m->...", g[..., m + N], h[..., n - m + N]) / SQRT_2PI


def mirror_modes(half) -> np.ndarray:
    """Centred array from modes ``0..N`` of an even-in-``n`` quantity."""
    half = np.asarray(half)
    return np.concatenate([half[..., :0:-1], half], axis=-1)


def modal_kernels_fft(target: Points, source: Points, k: float, n: int, N: int,
                      which=("S", "Knu", "Ktau")):
    """Mode ``n`` of the full kernels by the trapezoidal rule (distant pairs)."""
    phi = azimuthal_nodes(N)
    vals = full_kernels_3d(_expand(target), _expand(source), phi, k, which)
    wts = mode_weights(n, N)
    return {name: v @ wts for name, v in vals.items()}


def _expand(p: Points) -> Points:
    add = lambda a: None if a is None else np.asarray(a)[..., None]
    return Points(add(p.rc), add(p.z), add(p.nu_rc), add(p.nu_z))


# ---------------------------------------------------------------------------
# Q route
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairGeometry:
    """k-independent geometric data for target/source pairs."""

    target: Points
    source: Points
    d2: np.ndarray
    chim1: np.ndarray
    C: np.ndarray

    @classmethod
    def build(cls, target: Points, source: Points) -> "PairGeometry":
        drc = target.rc - source.rc
        dz = target.z - source.z
        d2 = drc ** 2 + dz ** 2
        if np.any(d2 == 0):
            raise ZeroDivisionError("coincident target and source points")
        prod = target.rc * source.rc
        return cls(target, source, d2, d2 / (2 * prod), 1.0 / np.sqrt(8 * np.pi ** 3 * prod))

    @property
    def chi(self):
        return 1.0 + self.chim1

    @property
    def distance(self):
        return np.sqrt(self.d2)

    def projection(self, m_rc, m_z):
        """``mu . (r - r') / |r - r'|^2``."""
        return (m_rc * (self.target.rc - self.source.rc) + m_z * (self.target.z - self.source.z)) / self.d2

    def T(self, mode: str = "expanded"):
        """Argument of the truncated log coefficient.

        ``"exact"`` gives ``|r-r'|^2/(4 r_c r_c') = (chi-1)/2``; ``"expanded"``
        replaces ``1/r_c'`` by four terms of its expansion about ``r_c``.
        """
        if mode == "exact":
            return 0.5 * self.chim1
        if mode != "expanded":
            raise ValueError(f"unknown log_t mode {mode!r}")
        u = (self.target.rc - self.source.rc) / self.target.rc
        return self.d2 / (4 * self.target.rc ** 2) * (1 + u * (1 + u * (1 + u)))


#: A target/source pair with its planar distance and ``chi``.
PointPair = PairGeometry


@dataclass(frozen=True)
class ModalLaplace:
    """Modes ``0..N`` of ``Z``, ``D_nu`` and ``D_tau`` (even in ``n``)."""

    Z: np.ndarray
    Dnu: np.ndarray | None
    Dtau: np.ndarray | None
    Q: np.ndarray
    R: np.ndarray


def modal_laplace(geom: PairGeometry, N: int, rule: str = "auto", need_normal=True) -> ModalLaplace:
    """``Z_n``, ``D_{nu n}`` and ``D_{tau n}`` for ``n = 0..N`` via toroidal harmonics."""
    tab = specfun.legendre_q(geom.chi, max(N, 1), geom.chim1, rule=rule)
    Q = tab.Q[..., : N + 1]
    R = tab.R[..., : N + 1]
    C = geom.C[..., None]
    Z = C * Q
    Dnu = Dtau = None
    t = geom.target
    if need_normal:
        a = (t.nu_rc / (2 * t.rc))[..., None]
        dnu = geom.projection(t.nu_rc, t.nu_z)[..., None]
        Dnu = C * ((dnu - a) * R - a * Q)
        b = (t.nu_z / (2 * t.rc))[..., None]
        dtau = geom.projection(*t.tau)[..., None]
        Dtau = C * (dtau * R - b * (R + Q))
    return ModalLaplace(Z, Dnu, Dtau, Q, R)


def truncated_log_coefficients(geom: PairGeometry, N: int, log_t: str = "expanded") -> np.ndarray:
    """``2F1~(-n+1/2, n+1/2; -T)`` for ``n = 0..N`` (the log coefficient of ``-Q``)."""
    n = np.arange(N + 1)
    c1, c2, c3 = specfun.truncated_f_coefficients(n)
    x = -geom.T(log_t)[..., None]
    return 1 + x * (c1 + x * (c2 + x * c3))


@dataclass(frozen=True)
class LogSplit:
    """Log coefficients (``G1``) of the Q-route modal kernels, modes ``0..N``.

    ``Dtau`` additionally has the Cauchy coefficient ``-C`` multiplying
    ``tau . (r - r') / |r - r'|^2``.
    """

    Z: np.ndarray
    Dnu: np.ndarray | None
    Dtau: np.ndarray | None
    cauchy: np.ndarray


def _log_coefficients(geom: PairGeometry, N: int, log_t: str):
    """``F`` (log coefficient of ``-Q``) and ``Rlog`` (log coefficient of ``R``), modes ``0..N``."""
    F = truncated_log_coefficients(geom, max(N, 1), log_t)
    chi = geom.chi[..., None]
    n = np.arange(F.shape[-1])
    # Mode -1 of Q equals mode 1, hence F[1] stands in for F[-1].
    prev = np.concatenate([F[..., 1:2], F[..., :-1]], axis=-1)
    Rlog = -(2 * n - 1) / (chi + 1) * (chi * F - prev)
    return F[..., : N + 1], Rlog[..., : N + 1]


def q_log_split(geom: PairGeometry, N: int, need_normal=True, log_t: str = "expanded") -> LogSplit:
    """Log coefficients of ``Z_n``, ``D_{nu n}``, ``D_{tau n}`` from the truncated split of ``Q``."""
    F, Rlog = _log_coefficients(geom, N, log_t)
    C = geom.C[..., None]
    t = geom.target
    Dnu = Dtau = None
    if need_normal:
        a = (t.nu_rc / (2 * t.rc))[..., None]
        dnu = geom.projection(t.nu_rc, t.nu_z)[..., None]
        Dnu = C * ((dnu - a) * Rlog + a * F)
        b = (t.nu_z / (2 * t.rc))[..., None]
        dtau = geom.projection(*t.tau)[..., None]
        Dtau = C * (dtau * Rlog - b * (Rlog - F))
    return LogSplit(-C * F, Dnu, Dtau, -geom.C)


@dataclass(frozen=True)
class SingularSplit:
    """``G_full = log|r - r'| G_log + G_cauchy mu.(r - r')/|r - r'|^2 + G0`` with smooth ``G0``.

    ``diagonal`` is the limit of ``G0`` as ``r' -> r``.  Arrays run over
    the pairs and, on the last axis, over modes ``0..N``.
    """

    G_log: np.ndarray
    G_cauchy: np.ndarray
    G_full: np.ndarray
    diagonal: np.ndarray


def modal_Z_Dnu_Dtau(target: Points, source: Points, n_max: int, rule: str = "auto"):
    """``(Z_n, D_{nu n}, D_{tau n})`` for ``n = 0..n_max`` by the Q route (target normals needed)."""
    lap = modal_laplace(PairGeometry.build(target, source), n_max, rule)
    return lap.Z, lap.Dnu, lap.Dtau


def dtau_R_split(geom: PairGeometry, N: int, log_t: str = "expanded", rule: str = "auto") -> SingularSplit:
    """Split of ``d_tau R_n(chi)`` with ``d_tau = tau.(r - r')/|r - r'|^2`` (target tangent).

    ``R_n`` tends to ``-1`` at coincidence for every ``n``, so the Cauchy
    coefficient is exactly ``-1``; the remainder and its limit vanish.
    """
    _, Rlog = _log_coefficients(geom, N, log_t)
    dtau = geom.projection(*geom.target.tau)[..., None]
    R = specfun.legendre_q(geom.chi, max(N, 1), geom.chim1, rule=rule).R[..., : N + 1]
    shape = np.broadcast_shapes(dtau.shape, Rlog.shape)
    return SingularSplit(dtau * Rlog, np.full(shape, -1.0), dtau * R, np.zeros(shape))


def modal_kernel_close(kind: str, target: Points, source: Points, n: int, N: int, k: float,
                       rule: str = "auto") -> np.ndarray:
    """Mode ``n`` of ``S``, ``Knu`` or ``Ktau`` by the kernel split.

    The Laplace factor comes from the Q route, the factor ``H1`` (or ``H3``)
    from the trapezoidal transform, and the two are convolved; the smooth
    product ``Z H2`` (or ``D H4``) is transformed directly.
    """
    if kind not in ("S", "Knu", "Ktau"):
        raise ValueError(f"unknown kernel {kind!r}")
    if abs(n) > N:
        raise ValueError(f"mode {n} exceeds N={N}")
    lap = modal_laplace(PairGeometry.build(target, source), N, rule, need_normal=kind != "S")
    phi = azimuthal_nodes(N)
    tgt, src = _expand(target), _expand(source)
    R, drc, dz = separation(tgt, src, phi)
    h1, _, h3, _ = radial_factors(k, R)
    if kind == "S":
        lap_half, h = lap.Z, h1
        smooth = INV_4PI * k * np.sinc(k * R / np.pi)
    else:
        m_rc, m_z = (tgt.nu_rc, tgt.nu_z) if kind == "Knu" else tgt.tau
        lap_half, h = (lap.Dnu if kind == "Knu" else lap.Dtau), h3
        smooth = -INV_4PI * (m_rc * drc + m_z * dz) * k ** 3 * _h4_over_cube(k * R)
    conv = convolve_truncated(mirror_modes(lap_half), modal_transform_fft(h), n)
    return conv + 1j * (smooth @ mode_weights(n, N))


@dataclass(frozen=True)
class ModalKernelSet:
    """Mode ``n`` of ``S``, ``K_nu`` and ``K_tau`` over a list of pairs."""

    n: int
    S: np.ndarray
    Knu: np.ndarray | None
    Ktau: np.ndarray | None
    route: str


def modal_kernels(target: Points, source: Points, k: float, n: int, N: int,
                  route: str = "distant-fft") -> ModalKernelSet:
    """All three modal kernels by the trapezoidal rule (``"distant-fft"``) or the split (``"close-split"``).

    ``K_nu`` and ``K_tau`` need target normals and are ``None`` without them.
    """
    kinds = ("S", "Knu", "Ktau") if target.nu_rc is not None else ("S",)
    if route == "distant-fft":
        vals = modal_kernels_fft(target, source, k, n, N, kinds)
    elif route == "close-split":
        vals = {kind: modal_kernel_close(kind, target, source, n, N, k) for kind in kinds}
    else:
        raise ValueError(f"unknown route {route!r}")
    return ModalKernelSet(n, vals["S"], vals.get("Knu"), vals.get("Ktau"), route)
