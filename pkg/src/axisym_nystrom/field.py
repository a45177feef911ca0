"""Post-processing: modal fields in the cross-section, boundary maps, normalization.

The modal field ``u_n(r) = sqrt(2 pi) int S_n(r, r') rho_n(r') r_c' d gamma'``
is evaluated at arbitrary points of the cross-section ``A``.  Panels within
one panel length of a target are replaced by the same leaves as in the
assembly, and leaves whose Bernstein ellipse contains the target receive
logarithmic product-integration corrections built at the target's complex
canonical coordinate.  Other panels use the plain 16-point rule.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import quadrature
from .assembly import (Discretization, ModalSolution, _finish_pairs, _leaf_nodes,
                       accumulate, close_pair_weights, source_leaves)
from .geometry import GeneratingCurve, GlobalGrid, Panel, gauss_legendre, panel_interpolation_matrix, sample_curve
from .kernels import SQRT_2PI, Points, azimuthal_nodes, full_kernels_3d, mode_weights, _expand

log = logging.getLogger(__name__)

#: Points closer than this to the generating curve count as boundary points.
BOUNDARY_BAND = 1e-12
TARGET_CHUNK = 512
NEWTON_STEPS = 40


class FieldError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Inside test and field grids
# ---------------------------------------------------------------------------

def _closest_parameter(curve: GeneratingCurve, t0, rc, z):
    """Newton iteration for the curve parameter closest to ``(rc, z)``."""
    ta, tb = curve.t_range
    t = np.array(t0, dtype=float)
    for _ in range(NEWTON_STEPS):
        x, y = curve.position(t)
        dx, dy = curve.velocity(t)
        ddx, ddy = curve.acceleration(t)
        ex, ey = x - rc, y - z
        g = ex * dx + ey * dy
        gp = dx * dx + dy * dy + ex * ddx + ey * ddy
        gp = np.where(gp > 0, gp, dx * dx + dy * dy)
        step = g / gp
        t = np.clip(t - step, ta, tb)
        if np.all(np.abs(step) < 1e-15 * (1 + np.abs(t))):
            break
    return t


def inside_region(curve: GeneratingCurve, rc, z, n_poly: int = 4096):
    """Classify half-plane points against the cross-section ``A``.

    Returns ``(inside, distance)``.  The crossing number of a ray in the
    ``+r_c`` direction against a fine polyline of the curve decides inside
    versus outside; the axis segment closing ``A`` is never crossed by such a
    ray.  Points near the curve are re-examined with the exact closest curve
    point and the sign of ``(p - r(t*)) . nu(t*)``.
    """
    rc = np.atleast_1d(np.asarray(rc, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(rc < 0):
        raise FieldError("half-plane points need r_c >= 0 (use |x| for the theta = pi half)")
    ta, tb = curve.t_range
    tp = np.linspace(ta, tb, n_poly + 1)
    px, pz = curve.position(tp)
    px, pz = np.asarray(px, float) * np.ones_like(tp), np.asarray(pz, float) * np.ones_like(tp)
    x0, z0, x1, z1 = px[:-1], pz[:-1], px[1:], pz[1:]
    crossings = np.zeros(rc.shape, dtype=int)
    for start in range(0, rc.size, 2048):
        sl = slice(start, start + 2048)
        zz = z[sl, None]
        spans = (z0 <= zz) != (z1 <= zz)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (zz - z0) * (x1 - x0) / (z1 - z0)
        crossings[sl] = np.sum(spans & (xc > rc[sl, None]), axis=1)
    inside = crossings % 2 == 1

    tree = cKDTree(np.column_stack([px, pz]))
    dist, idx = tree.query(np.column_stack([rc, z]))
    near = dist < 0.05 * max(np.ptp(px), np.ptp(pz))
    if np.any(near):
        t_star = _closest_parameter(curve, tp[idx[near]], rc[near], z[near])
        cx, cz = curve.position(t_star)
        dx, dz = curve.velocity(t_star)
        ex, ez = rc[near] - cx, z[near] - cz
        d = np.hypot(ex, ez)
        dist[near] = d
        interior = (t_star > ta) & (t_star < tb)
        side = ex * (-dz) + ez * dx
        ins = inside[near]
        ins[interior] = side[interior] < 0
        inside[near] = ins
    return inside, dist


@dataclass(frozen=True)
class FieldGrid:
    """Field points in the meridian plane.

    ``x`` is signed: ``x >= 0`` lies in the half-plane ``theta = 0`` and
    ``x < 0`` in ``theta = pi``; ``rc = |x|``.  Only points inside the
    cross-section (and farther than the boundary band from the curve) are kept.
    """

    x: np.ndarray
    z: np.ndarray
    distance: np.ndarray

    @property
    def rc(self) -> np.ndarray:
        return np.abs(self.x)

    @property
    def theta(self) -> np.ndarray:
        return np.where(self.x < 0, np.pi, 0.0)

    def __len__(self) -> int:
        return self.x.size

    @classmethod
    def from_points(cls, curve: GeneratingCurve, x, z, band: float = BOUNDARY_BAND,
                    strict: bool = True) -> "FieldGrid":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        inside, dist = inside_region(curve, np.abs(x), z)
        keep = inside & (dist > band)
        if strict and not np.all(keep):
            bad = np.nonzero(~keep)[0][:5]
            raise FieldError(f"targets outside the cross-section or on the curve: indices {bad.tolist()}")
        return cls(x[keep], z[keep], dist[keep])

    @classmethod
    def from_window(cls, curve: GeneratingCurve, x_range, z_range, nx: int, nz: int,
                    band: float = BOUNDARY_BAND) -> "FieldGrid":
        """Uniform ``nx`` by ``nz`` grid on the window, restricted to the cross-section."""
        xs = np.linspace(x_range[0], x_range[1], nx)
        zs = np.linspace(z_range[0], z_range[1], nz)
        X, Z = np.meshgrid(xs, zs)
        return cls.from_points(curve, X.ravel(), Z.ravel(), band, strict=False)

    def subsample(self, count: int, seed: int = 0) -> "FieldGrid":
        if count >= len(self):
            return self
        idx = np.sort(np.random.default_rng(seed).choice(len(self), count, replace=False))
        return FieldGrid(self.x[idx], self.z[idx], self.distance[idx])


# ---------------------------------------------------------------------------
# Off-curve near weights
# ---------------------------------------------------------------------------

def complex_canonical_coordinate(leaf_zeta: np.ndarray, target_zeta: np.ndarray,
                                 start: np.ndarray, tol: float = 1e-14):
    """Solve ``zeta(x0) = zeta_target`` for the leaf's polynomial interpolant ``zeta``.

    ``leaf_zeta`` holds ``r_c + i z`` at the leaf's Gauss-Legendre nodes;
    ``start`` are initial canonical coordinates.  Returns ``(x0, ok)``.
    """
    n = leaf_zeta.size
    coef = quadrature.legendre_coefficient_matrix(n) @ leaf_zeta
    dcoef = np.polynomial.legendre.legder(coef)
    scale = np.max(np.abs(coef[1:])) + np.finfo(float).tiny
    x = np.asarray(start, dtype=complex).copy()
    ok = np.zeros(x.shape, dtype=bool)
    for _ in range(NEWTON_STEPS):
        res = np.polynomial.legendre.legval(x, coef) - target_zeta
        der = np.polynomial.legendre.legval(x, dcoef)
        step = res / der
        x = x - step
        ok = np.abs(step) < tol * (1 + np.abs(x))
        if np.all(ok):
            break
        # Keep wandering iterates from overflowing the polynomial evaluation.
        x = np.where(np.abs(x) > 10, 10 * x / np.abs(x), x)
    res = np.abs(np.polynomial.legendre.legval(x, coef) - target_zeta)
    ok = ok | (res < 1e-13 * scale)
    return x, ok


def near_weights_offgrid(curve: GeneratingCurve, panel: Panel, rc, z) -> quadrature.NearWeights:
    """Log corrections and canonical Cauchy compensation for targets off the curve near ``panel``.

    ``int log|r - r'| p d gamma' = sum_j (log|r - r_j| + log_j) p_j s_j w_j``
    to the panel's polynomial order.  Corrections decay smoothly with
    distance, so callers skip them outside the near zone.
    """
    rc = np.atleast_1d(np.asarray(rc, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    nodes = sample_curve(curve, panel.nodes, panel.weights)
    zeta_nodes = nodes.rc + 1j * nodes.z
    zeta_t = rc + 1j * z
    if np.any(np.min(np.abs(zeta_t[:, None] - zeta_nodes[None, :]), axis=1) == 0):
        raise FieldError("target coincides with a quadrature node; use the on-grid weights")
    nearest = np.argmin(np.abs(zeta_t[:, None] - zeta_nodes[None, :]), axis=1)
    x0, ok = complex_canonical_coordinate(zeta_nodes, zeta_t, panel.canonical_nodes[nearest])
    if not np.all(ok):
        raise FieldError("canonical coordinate of a target did not converge")
    return quadrature.NearWeights(x0, quadrature.log_corrections(x0, panel.n_pt),
                                  quadrature.cauchy_compensation(x0, panel.n_pt), "off-curve")


def _panel_node_distance(grid: GlobalGrid, q: int, rc, z):
    sl = grid.panel_slice(q)
    nodes = grid.nodes
    d = np.hypot(rc[:, None] - nodes.rc[None, sl], z[:, None] - nodes.z[None, sl])
    return d.min(axis=1)


def near_pairs_offgrid(disc: Discretization, rc, z):
    """Leaf pairs for off-curve targets near panels, plus the target/panel near mask."""
    grid = disc.grid
    opts = disc.opts
    n_pt = grid.n_pt
    x16 = gauss_legendre(n_pt)[0]
    tgt = Points(rc, z)
    near_mask = np.zeros((rc.size, grid.n_pan), dtype=bool)
    blocks = {key: [] for key in ("ti", "src", "w", "cols", "interp", "wcorr", "wcmp")}
    n_src_total = 0
    for q in range(grid.n_pan):
        close = _panel_node_distance(grid, q, rc, z) < grid.panel_arclength(q)
        near_mask[:, q] = close
        ti = np.nonzero(close)[0]
        if ti.size == 0:
            continue
        leaves = source_leaves(grid, q, disc.N, opts)
        leaf_ns = _leaf_nodes(grid, leaves)
        interp = panel_interpolation_matrix(x16, grid.panels[q].canonical(leaf_ns.t))
        n_src = leaf_ns.t.size
        wcorr = np.zeros((ti.size, n_src))
        zeta_t = rc[ti] + 1j * z[ti]
        offset = 0
        for lf in leaves:
            sl = slice(offset, offset + lf.n_pt)
            offset += lf.n_pt
            zeta_leaf = leaf_ns.rc[sl] + 1j * leaf_ns.z[sl]
            nearest = np.argmin(np.abs(zeta_t[:, None] - zeta_leaf[None, :]), axis=1)
            x_nodes = gauss_legendre(lf.n_pt)[0]
            # Cheap prefilter: targets far from the leaf relative to its size never need corrections.
            size = np.max(np.abs(zeta_leaf - zeta_leaf.mean()))
            cand = np.abs(zeta_t - zeta_leaf[nearest]) < 3 * size
            if not np.any(cand):
                continue
            x0, ok = complex_canonical_coordinate(zeta_leaf, zeta_t[cand], x_nodes[nearest[cand]])
            use = ok & (quadrature.bernstein_radius(x0) < opts.near_rho)
            if not np.any(use):
                continue
            rows = np.nonzero(cand)[0][use]
            wcorr[rows, sl] = quadrature.log_corrections(x0[use], lf.n_pt)
        blocks["ti"].append(np.repeat(ti, n_src))
        blocks["src"].append(np.tile(np.arange(n_src), ti.size) + n_src_total)
        n_src_total += n_src
        blocks["w"].append(leaf_ns)
        blocks["cols"].append(np.full(ti.size * n_src, q))
        blocks["interp"].append(np.tile(interp, (ti.size, 1)))
        blocks["wcorr"].append(wcorr.ravel())
        blocks["wcmp"].append(np.zeros(ti.size * n_src))
    if not blocks["ti"]:
        return None, near_mask
    return _finish_pairs(tgt, blocks, rc.size), near_mask


def _distant_rows(disc: Discretization, rc, z, k: float, n: int, near_mask):
    """Plain-rule matrix rows for target/panel combinations outside the near zone."""
    grid = disc.grid
    nodes = grid.nodes
    mask = ~np.repeat(near_mask, grid.n_pt, axis=1)
    ti, sj = np.nonzero(mask)
    out = np.zeros((rc.size, grid.m), dtype=complex)
    phi = azimuthal_nodes(disc.N)
    wn = mode_weights(n, disc.N)
    tgt_all = Points(rc, z)
    src_all = Points(nodes.rc, nodes.z)
    src_w = nodes.rc * nodes.s * nodes.w
    for start in range(0, ti.size, 4096):
        sl = slice(start, start + 4096)
        vals = full_kernels_3d(_expand(tgt_all.take(ti[sl])), _expand(src_all.take(sj[sl])), phi, k, ("S",))["S"]
        out[ti[sl], sj[sl]] = (vals @ wn) * src_w[sj[sl]]
    return out


def field_matrix(disc: Discretization, rc, z, k: float, n: int) -> np.ndarray:
    """Matrix mapping grid densities to ``int S_n(r, r') rho(r') r_c' d gamma'`` at targets."""
    rc = np.asarray(rc, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(rc <= 0):
        raise FieldError("field_matrix needs targets with r_c > 0")
    pairs, near_mask = near_pairs_offgrid(disc, rc, z)
    M = _distant_rows(disc, rc, z, k, n, near_mask)
    if pairs is not None:
        w = close_pair_weights(pairs, "S", k, n, disc.N, disc.opts)
        M += accumulate(pairs, w, disc.grid.n_pt, disc.grid.m)
    return M


def eval_field(solution: ModalSolution, targets: FieldGrid, chunk: int = TARGET_CHUNK) -> np.ndarray:
    """Modal field ``u_n`` at the targets (values in the meridian half-plane).

    Multiply by ``exp(i n theta)`` (see :attr:`FieldGrid.theta`) for the
    field in the plane ``theta = 0, pi``.  On-axis targets give ``0`` for
    ``n != 0``; for ``n = 0`` they are evaluated a tiny distance off the axis.
    """
    disc = solution.disc
    n, k = solution.n, solution.k
    rc = targets.rc.astype(float).copy()
    z = targets.z
    on_axis = rc == 0
    rc[on_axis] = 1e-9
    out = np.empty(rc.size, dtype=complex)
    for start in range(0, rc.size, chunk):
        sl = slice(start, start + chunk)
        out[sl] = SQRT_2PI * (field_matrix(disc, rc[sl], z[sl], k, n) @ solution.rho)
    if n != 0:
        out[on_axis] = 0.0
    return out


def boundary_values(solution: ModalSolution) -> np.ndarray:
    """``u_n`` at the grid points on the curve."""
    S = solution.disc.operator("S", solution.k, solution.n)
    return SQRT_2PI * (S @ solution.rho)


def eval_tangential_derivative(solution: ModalSolution) -> np.ndarray:
    """``tau . grad u_n`` at the grid points on the curve."""
    Kt = solution.disc.operator("Ktau", solution.k, solution.n)
    return SQRT_2PI * (Kt @ solution.rho)


# ---------------------------------------------------------------------------
# Normalization of eigenfunctions
# ---------------------------------------------------------------------------

@dataclass
class NormalizedEigenfunction:
    """Boundary data of an eigenfunction with ``||u sqrt(r_c)||_{L2(A)} = 1`` and real ``u``.

    ``scale`` is the factor applied to the raw data (the phase divided by the
    raw norm ``norm``).
    """

    n: int
    k: float
    u: np.ndarray
    tangential: np.ndarray
    scale: complex
    norm: float

    @property
    def phase(self) -> complex:
        return self.scale * self.norm


def barnett_norm_squared(u, tangential, k: float, n: int, grid: GlobalGrid) -> float:
    """``int_A |u|^2 r_c dA`` from boundary data of a Neumann eigenfunction."""
    nodes = grid.nodes
    rc = nodes.rc
    nu_rc, nu_z = nodes.nu
    r_dot_nu = rc * nu_rc + nodes.z * nu_z
    integrand = r_dot_nu * ((k * k - n * n / rc ** 2) * np.abs(u) ** 2 - np.abs(tangential) ** 2)
    return float(np.sum(integrand * rc * nodes.s * nodes.w) / (2 * k * k))


def real_phase(u, weights) -> complex:
    """Unit factor ``c`` minimizing ``sum w |Im(c u)|^2``.

    Of the two minimizers the one making the largest-modulus entry of
    ``c u`` positive is returned.
    """
    u = np.asarray(u, dtype=complex)
    s = np.sum(weights * u * u)
    c = np.exp(-0.5j * np.angle(s)) if abs(s) > 0 else 1.0 + 0j
    j = np.argmax(np.abs(u))
    if (c * u[j]).real < 0:
        c = -c
    return complex(c)


def normalize_eigenfunction(u, tangential, k: float, n: int, grid: GlobalGrid) -> NormalizedEigenfunction:
    """Scale and rotate boundary data so that ``||u sqrt(r_c)||_{L2(A)} = 1`` and ``u`` is real."""
    norm2 = barnett_norm_squared(u, tangential, k, n, grid)
    if not norm2 > 0:
        raise FieldError(f"non-positive boundary norm {norm2:.3e}; k may not be an eigenwavenumber")
    norm = float(np.sqrt(norm2))
    c = real_phase(u, grid.nodes.s * grid.nodes.w)
    scale = c / norm
    return NormalizedEigenfunction(n, float(k), scale * np.asarray(u), scale * np.asarray(tangential),
                                   scale, norm)


def normalized_solution(solution: ModalSolution) -> tuple[ModalSolution, NormalizedEigenfunction]:
    """Normalize a homogeneous solution; returns the rescaled density and boundary data."""
    u = boundary_values(solution)
    tu = eval_tangential_derivative(solution)
    ef = normalize_eigenfunction(u, tu, solution.k, solution.n, solution.disc.grid)
    scaled = ModalSolution(solution.n, solution.k, solution.rho * ef.scale, solution.f * 0,
                           solution.disc, solution.residual)
    return scaled, ef
