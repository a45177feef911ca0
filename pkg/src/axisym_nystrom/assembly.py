"""Nystrom discretization of the modal integral operators on the generating curve.

Every operator is represented as a matrix ``M`` acting on nodal values of a
density ``rho`` on the global grid with

    (M rho)_i  ~  int_gamma G_n(r_i, r') rho(r') r_c' d gamma'

for ``G = S`` (single layer), ``K_nu`` or ``K_tau``.  Distant panel pairs use
the trapezoidal rule in azimuth and the plain Gauss-Legendre rule along the
curve.  Interactions of a panel with itself and its neighbours are computed
on temporary *leaves* (sub-panels with 32 nodes): the source panel is split
into at most four sub-panels, and the panels touching the axis are refined
geometrically towards it.  Source values on the leaves are interpolated from
the 16 grid nodes; targets stay at the grid nodes.  The log-singular parts
(and the Cauchy part of ``K_tau``) are handled by product integration on
leaves that are close to the target.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels, quadrature
from .geometry import (MAX_BINARY_LEVELS, N_PT_UPSAMPLED, GlobalGrid, Panel,
                       build_mesh, gauss_legendre, panel_interpolation_matrix,
                       refine_panel_binary, sample_curve, split_panel)
from .kernels import SQRT_2PI, PairGeometry, Points

log = logging.getLogger(__name__)

#: Panel width (in parameter) times the largest azimuthal index per sub-panel.
SUBPANEL_CONSTANT = 3.0
MAX_SUBPANELS = 4
#: Target/source pairs processed together.
CHUNK = 4096
KINDS = ("S", "Knu", "Ktau")


class AssemblyError(RuntimeError):
    pass


class SingularSystemError(np.linalg.LinAlgError):
    """The system matrix is numerically singular (k close to an eigenwavenumber)."""

    def __init__(self, message, rcond):
        super().__init__(message)
        self.rcond = rcond


@dataclass(frozen=True)
class Options:
    """Discretization switches.

    ``q_rule``: dispatch between forward and backward Legendre recursion
    (``"auto"`` or ``"paper"``).  ``log_t``: argument of the truncated log
    coefficient (``"expanded"`` keeps four terms of the expansion of
    ``1/r_c'`` about ``r_c``, ``"exact"`` uses ``(chi - 1)/2``).
    """

    q_rule: str = "auto"
    log_t: str = "expanded"
    axis_levels: int = MAX_BINARY_LEVELS
    subpanel_constant: float = SUBPANEL_CONSTANT
    max_subpanels: int = MAX_SUBPANELS
    leaf_order: int = N_PT_UPSAMPLED
    near_rho: float = quadrature.NEAR_RHO


def subpanel_refine_rule(n: int, panel: Panel, grid_spacing: float | None = None,
                         constant: float = SUBPANEL_CONSTANT, cap: int = MAX_SUBPANELS) -> int:
    """Number of sub-panels (1..cap) used for close interactions.

    ``n`` is the largest azimuthal index that enters the Legendre-function
    route; ``grid_spacing`` defaults to the panel's parameter width.
    """
    width = (panel.t_b - panel.t_a) if grid_spacing is None else grid_spacing
    count = math.ceil(abs(n) * abs(width) / constant - 1e-12)
    return int(min(max(count, 1), cap))


def source_leaves(grid: GlobalGrid, q: int, N: int, opts: Options) -> list[Panel]:
    """Temporary leaves replacing panel ``q`` as a source of close interactions."""
    panel = grid.panels[q]
    count = subpanel_refine_rule(N, panel, constant=opts.subpanel_constant, cap=opts.max_subpanels)
    leaves = split_panel(panel, count, opts.leaf_order)
    if opts.axis_levels:
        if q == 0:
            leaves = refine_panel_binary(leaves[0], opts.axis_levels, "toward-start") + leaves[1:]
        if q == grid.n_pan - 1:
            leaves = leaves[:-1] + refine_panel_binary(leaves[-1], opts.axis_levels, "toward-end")
    return leaves


# ---------------------------------------------------------------------------
# Pair lists
# ---------------------------------------------------------------------------

@dataclass
class LeafPairs:
    """Target/leaf-node pairs together with their correction weights.

    ``cols`` and ``interp`` map each pair onto the 16 grid nodes of its
    source panel.  ``wcorr`` and ``wcmp`` vanish for pairs whose leaf is not
    close to the target.
    """

    target: Points
    target_index: np.ndarray
    source: Points
    weight: np.ndarray
    cols: np.ndarray
    interp: np.ndarray
    wcorr: np.ndarray
    wcmp: np.ndarray
    n_targets: int
    cache: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return self.target_index.size


def _leaf_nodes(grid: GlobalGrid, leaves):
    t = np.concatenate([lf.nodes for lf in leaves])
    w = np.concatenate([lf.weights for lf in leaves])
    return sample_curve(grid.curve, t, w)


def close_pairs_on_grid(grid: GlobalGrid, N: int, opts: Options = Options()) -> LeafPairs:
    """All close pairs with targets at the grid nodes."""
    nodes = grid.nodes
    tgt_pts = Points.from_nodes(nodes)
    n_pt = grid.n_pt
    x16 = gauss_legendre(n_pt)[0]
    blocks = {key: [] for key in ("ti", "src", "w", "cols", "interp", "wcorr", "wcmp")}
    for q in range(grid.n_pan):
        panel = grid.panels[q]
        leaves = source_leaves(grid, q, N, opts)
        leaf_ns = _leaf_nodes(grid, leaves)
        interp = panel_interpolation_matrix(x16, panel.canonical(leaf_ns.t))
        tau_src = leaf_ns.tau
        for p in grid.neighbors(q):
            ti = np.arange(p * n_pt, (p + 1) * n_pt)
            n_src = leaf_ns.t.size
            wcorr = np.zeros((ti.size, n_src))
            wcmp = np.zeros((ti.size, n_src))
            tau_t = (nodes.tau[0][ti], nodes.tau[1][ti])
            offset = 0
            for lf in leaves:
                sl = slice(offset, offset + lf.n_pt)
                offset += lf.n_pt
                x = lf.canonical(nodes.t[ti])
                near = quadrature.bernstein_radius(x) < opts.near_rho
                if not np.any(near):
                    continue
                xn = x[near]
                wcorr[near, sl] = quadrature.log_corrections(xn, lf.n_pt)
                dot = tau_t[0][near, None] * tau_src[0][None, sl] + tau_t[1][near, None] * tau_src[1][None, sl]
                wcmp[near, sl] = -dot * quadrature.cauchy_compensation(xn, lf.n_pt)
            blocks["ti"].append(np.repeat(ti, n_src))
            blocks["src"].append(np.tile(np.arange(n_src), ti.size) + sum(len(b) for b in blocks["w"]))
            blocks["w"].append(leaf_ns)
            blocks["cols"].append(np.full(ti.size * n_src, q))
            blocks["interp"].append(np.tile(interp, (ti.size, 1)))
            blocks["wcorr"].append(wcorr.ravel())
            blocks["wcmp"].append(wcmp.ravel())
    return _finish_pairs(tgt_pts, blocks, grid.m)


def _finish_pairs(tgt_pts: Points, blocks, n_targets) -> LeafPairs:
    ns_list = blocks["w"]
    cat = lambda attr: np.concatenate([getattr(ns, attr) for ns in ns_list])
    rc, z, w = cat("rc"), cat("z"), cat("w")
    s = np.concatenate([ns.s for ns in ns_list])
    nu_rc = np.concatenate([ns.nu[0] for ns in ns_list])
    nu_z = np.concatenate([ns.nu[1] for ns in ns_list])
    src = np.concatenate(blocks["src"])
    ti = np.concatenate(blocks["ti"])
    source = Points(rc[src], z[src], nu_rc[src], nu_z[src])
    return LeafPairs(
        target=tgt_pts.take(ti),
        target_index=ti,
        source=source,
        weight=(s * w)[src],
        cols=np.concatenate(blocks["cols"]),
        interp=np.concatenate(blocks["interp"]),
        wcorr=np.concatenate(blocks["wcorr"]),
        wcmp=np.concatenate(blocks["wcmp"]),
        n_targets=n_targets,
    )


# ---------------------------------------------------------------------------
# Kernel evaluation on pairs
# ---------------------------------------------------------------------------

def _slice_points(p: Points, sl) -> Points:
    return p.take(sl)


def _laplace_parts(pairs: LeafPairs, sl, N: int, kind: str, opts: Options):
    """k-independent Q-route modes and their log / Cauchy coefficients (cached)."""
    key = (kind, N, opts.q_rule, opts.log_t, sl.start)
    hit = pairs.cache.get(key)
    if hit is not None:
        return hit
    geom = PairGeometry.build(_slice_points(pairs.target, sl), _slice_points(pairs.source, sl))
    lap = kernels.modal_laplace(geom, N, opts.q_rule, need_normal=kind != "S")
    split = kernels.q_log_split(geom, N, need_normal=kind != "S", log_t=opts.log_t)
    full = {"S": lap.Z, "Knu": lap.Dnu, "Ktau": lap.Dtau}[kind]
    g1 = {"S": split.Z, "Knu": split.Dnu, "Ktau": split.Dtau}[kind]
    out = (full, g1, split.cauchy if kind == "Ktau" else None)
    pairs.cache[key] = out
    return out


def _half_weights(n: int, N: int) -> np.ndarray:
    theta = 2 * np.pi * np.arange(N + 1) / (2 * N + 1)
    w = np.full(N + 1, 2.0)
    w[0] = 1.0
    return w * np.cos(n * theta) * (SQRT_2PI / (2 * N + 1))


def _even_modes(half_samples: np.ndarray) -> np.ndarray:
    """Modes ``0..N`` of an even, real function from its samples at ``theta_0..theta_N``."""
    full = np.concatenate([half_samples, half_samples[..., :0:-1]], axis=-1)
    N = half_samples.shape[-1] - 1
    return np.fft.rfft(full, axis=-1).real * (SQRT_2PI / (2 * N + 1))


def _even_convolution(g: np.ndarray, h: np.ndarray, n: int) -> np.ndarray:
    """Truncated convolution of even mode sequences stored for ``0..N``."""
    N = g.shape[-1] - 1
    if abs(n) > N:
        raise AssemblyError(f"mode {n} exceeds the azimuthal resolution N={N}")
    m = np.arange(max(n - N, -N), min(N, N + n) + 1)
    return np.einsum("pm,pm->p", g[:, np.abs(m)], h[:, np.abs(n - m)]) / SQRT_2PI


def close_pair_weights(pairs: LeafPairs, kind: str, k: float, n: int, N: int,
                       opts: Options = Options()) -> np.ndarray:
    """Per-pair quadrature weight including product-integration corrections."""
    if kind not in KINDS:
        raise ValueError(f"unknown kernel kind {kind!r}")
    theta = 2 * np.pi * np.arange(N + 1) / (2 * N + 1)
    wn = _half_weights(n, N)
    out = np.empty(len(pairs), dtype=complex)
    for start in range(0, len(pairs), CHUNK):
        sl = slice(start, min(start + CHUNK, len(pairs)))
        full, g1, cauchy = _laplace_parts(pairs, sl, N, kind, opts)
        tgt = kernels._expand(_slice_points(pairs.target, sl))
        src = kernels._expand(_slice_points(pairs.source, sl))
        R, drc, dz = kernels.separation(tgt, src, theta)
        x = k * R
        cos_x, sin_x = np.cos(x), np.sin(x)
        if kind == "S":
            h_sing = cos_x
            smooth = kernels.INV_4PI * k * np.sinc(x / np.pi)
        else:
            h_sing = cos_x + x * sin_x
            m_rc, m_z = (tgt.nu_rc, tgt.nu_z) if kind == "Knu" else tgt.tau
            smooth = -kernels.INV_4PI * (m_rc * drc + m_z * dz) * k ** 3 * kernels._h4_over_cube(x)
        hm = _even_modes(h_sing)
        sing = _even_convolution(full, hm, n) + 1j * (smooth @ wn)
        g1n = _even_convolution(g1, hm, n)
        rc_src = pairs.source.rc[sl]
        val = (sing + g1n * pairs.wcorr[sl]) * rc_src * pairs.weight[sl]
        if cauchy is not None:
            m = np.arange(max(n - N, -N), min(N, N + n) + 1)
            g2n = cauchy * hm[:, np.abs(n - m)].sum(axis=1) / SQRT_2PI
            val = val + g2n * rc_src * pairs.wcmp[sl]
        out[sl] = val
    return out


def accumulate(pairs: LeafPairs, weights: np.ndarray, n_pt: int, n_cols: int) -> np.ndarray:
    """Scatter per-pair weights through the interpolation rows into a dense matrix."""
    rows = np.repeat(pairs.target_index, n_pt)
    cols = (pairs.cols[:, None] * n_pt + np.arange(n_pt)[None, :]).ravel()
    vals = (weights[:, None] * pairs.interp).ravel()
    flat = rows * n_cols + cols
    size = pairs.n_targets * n_cols
    re = np.bincount(flat, weights=vals.real, minlength=size)
    im = np.bincount(flat, weights=vals.imag, minlength=size)
    return (re + 1j * im).reshape(pairs.n_targets, n_cols)


def distant_matrix(grid: GlobalGrid, kind: str, k: float, n: int, N: int,
                   mask: np.ndarray | None = None) -> np.ndarray:
    """Plain-quadrature entries for panel pairs that are not neighbours (zero elsewhere)."""
    nodes = grid.nodes
    m = grid.m
    if mask is None:
        pi = grid.panel_index
        mask = np.abs(pi[:, None] - pi[None, :]) >= 2
    ti, sj = np.nonzero(mask)
    out = np.zeros((m, m), dtype=complex)
    pts = Points.from_nodes(nodes)
    theta = 2 * np.pi * np.arange(N + 1) / (2 * N + 1)
    wn = _half_weights(n, N)
    src_w = nodes.rc * nodes.s * nodes.w
    for start in range(0, ti.size, CHUNK):
        sl = slice(start, start + CHUNK)
        tgt = kernels._expand(pts.take(ti[sl]))
        src = kernels._expand(pts.take(sj[sl]))
        vals = kernels.full_kernels_3d(tgt, src, theta, k, (kind,))[kind]
        out[ti[sl], sj[sl]] = (vals @ wn) * src_w[sj[sl]]
    return out


def close_mask(grid: GlobalGrid) -> np.ndarray:
    pi = grid.panel_index
    return np.abs(pi[:, None] - pi[None, :]) <= 1


# ---------------------------------------------------------------------------
# Assembly front end
# ---------------------------------------------------------------------------

@dataclass
class Discretization:
    """Mesh, azimuthal resolution and reusable k-independent close-zone data."""

    grid: GlobalGrid
    N: int
    opts: Options = Options()
    _pairs: LeafPairs | None = field(default=None, repr=False)

    @classmethod
    def build(cls, curve, n_pan: int, N_ratio: float | None = None, N: int | None = None,
              opts: Options = Options()) -> "Discretization":
        _, grid = build_mesh(curve, n_pan)
        if N is None:
            if N_ratio is None:
                raise AssemblyError("give N or N_ratio")
            N = int(round(N_ratio * n_pan))
        if N < 1:
            raise AssemblyError(f"azimuthal resolution N must be positive, got {N}")
        return cls(grid, int(N), opts)

    @property
    def pairs(self) -> LeafPairs:
        if self._pairs is None:
            self._pairs = close_pairs_on_grid(self.grid, self.N, self.opts)
            log.debug("close zone: %d target/leaf pairs", len(self._pairs))
        return self._pairs

    def operator(self, kind: str, k: float, n: int) -> np.ndarray:
        """Matrix of ``rho -> int G_n(r_i, r') rho(r') r_c' d gamma'`` on the grid."""
        if abs(n) > self.N:
            raise AssemblyError(f"mode {n} exceeds the azimuthal resolution N={self.N}")
        grid = self.grid
        M = distant_matrix(grid, kind, k, n, self.N)
        w = close_pair_weights(self.pairs, kind, k, n, self.N, self.opts)
        M += accumulate(self.pairs, w, grid.n_pt, grid.m)
        return M


@dataclass
class SystemMatrix:
    """``A = I + 2 sqrt(2 pi) K`` for the interior Neumann problem in mode ``n``."""

    n: int
    k: float
    A: np.ndarray
    disc: Discretization

    @property
    def grid(self) -> GlobalGrid:
        return self.disc.grid

    @property
    def close_mask(self) -> np.ndarray:
        return close_mask(self.grid)


@dataclass
class ModalSolution:
    n: int
    k: float
    rho: np.ndarray
    f: np.ndarray
    disc: Discretization
    residual: float = 0.0


def assemble(curve_or_disc, n_pan: int | None = None, n: int = 0, k: float = 1.0,
             N_ratio: float | None = None, opts: Options = Options()) -> SystemMatrix:
    """System matrix for mode ``n`` and wavenumber ``k``.

    Pass either a :class:`Discretization` (reused across calls) or a curve
    together with ``n_pan`` and ``N_ratio``.
    """
    if isinstance(curve_or_disc, Discretization):
        disc = curve_or_disc
    else:
        disc = Discretization.build(curve_or_disc, n_pan, N_ratio, opts=opts)
    K = disc.operator("Knu", k, n)
    A = np.eye(disc.grid.m, dtype=complex) + 2 * SQRT_2PI * K
    return SystemMatrix(n, float(k), A, disc)


def solve_neumann(system: SystemMatrix, f, rcond_min: float = 1e-14) -> ModalSolution:
    """Solve ``A rho = 2 f`` by LU factorization with partial pivoting."""
    f = np.asarray(f, dtype=complex)
    A = system.A
    lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    anorm = np.linalg.norm(A, 1)
    gecon = scipy.linalg.get_lapack_funcs("gecon", (lu,))
    rcond, _ = gecon(lu, anorm, norm="1")
    if rcond < rcond_min:
        raise SingularSystemError(
            f"system matrix is numerically singular (rcond={rcond:.3e}); k={system.k} may be an eigenwavenumber",
            rcond)
    rho = scipy.linalg.lu_solve((lu, piv), 2 * f)
    res = np.linalg.norm(A @ rho - 2 * f) / max(np.linalg.norm(2 * f), np.finfo(float).tiny)
    return ModalSolution(system.n, system.k, rho, f, system.disc, float(res))
