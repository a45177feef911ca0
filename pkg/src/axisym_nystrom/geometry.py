"""Generating curves, panel meshes and the global Nystrom grid.

A body of revolution is described by its generating curve
``r(t) = (r_c(t), z(t))`` in the half-plane ``theta = 0``.  The curve starts
and ends on the z-axis.  Panels are uniform in the parameter ``t`` and carry
Gauss-Legendre nodes; concatenating the panel nodes gives the global grid on
which densities live.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

N_PT = 16
N_PT_UPSAMPLED = 32
MAX_BINARY_LEVELS = 11


class GeometryError(ValueError):
    """Raised when a curve or mesh is not usable."""


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Canonical Gauss-Legendre nodes and weights on [-1, 1] (read-only)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


Vec2Fn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class GeneratingCurve:
    """Parameterized half-plane curve with analytic derivatives.

    ``position``, ``velocity`` and ``acceleration`` map parameter arrays to
    ``(r_c, z)`` pairs.  They should accept complex arguments when the curve
    is analytic (the built-in families do).
    """

    position: Vec2Fn
    velocity: Vec2Fn
    acceleration: Vec2Fn
    t_range: tuple[float, float] = (0.0, np.pi)
    name: str = "curve"
    params: dict = field(default_factory=dict)

    def eval(self, t):
        return self.position(np.asarray(t))

    def speed(self, t):
        drc, dz = self.velocity(np.asarray(t))
        return np.hypot(drc, dz)

    def tangent(self, t):
        """Unit tangent ``tau = (nu_z, -nu_rc)``, pointing in increasing ``t``."""
        drc, dz = self.velocity(np.asarray(t))
        s = np.hypot(drc, dz)
        return drc / s, dz / s

    def normal(self, t):
        """Outward unit normal ``nu = (nu_rc, nu_z)``."""
        drc, dz = self.velocity(np.asarray(t))
        s = np.hypot(drc, dz)
        return -dz / s, drc / s


def star(amplitude: float = 0.25, frequency: int = 5) -> GeneratingCurve:
    """Curve ``(1 + a cos(f t)) (sin t, cos t)`` on ``[0, pi]``."""
    a, f = float(amplitude), float(frequency)
    if not abs(a) < 1:
        raise GeometryError("star amplitude must satisfy |a| < 1")

    def position(t):
        rho = 1 + a * np.cos(f * t)
        return rho * np.sin(t), rho * np.cos(t)

    def velocity(t):
        rho = 1 + a * np.cos(f * t)
        drho = -a * f * np.sin(f * t)
        return (drho * np.sin(t) + rho * np.cos(t),
                drho * np.cos(t) - rho * np.sin(t))

    def acceleration(t):
        rho = 1 + a * np.cos(f * t)
        drho = -a * f * np.sin(f * t)
        d2rho = -a * f * f * np.cos(f * t)
        return (d2rho * np.sin(t) + 2 * drho * np.cos(t) - rho * np.sin(t),
                d2rho * np.cos(t) - 2 * drho * np.sin(t) - rho * np.cos(t))

    return GeneratingCurve(position, velocity, acceleration, name="star",
                           params={"amplitude": a, "frequency": f})


def sphere() -> GeneratingCurve:
    """Unit sphere, ``(sin t, cos t)``."""
    c = star(0.0, 0)
    return GeneratingCurve(c.position, c.velocity, c.acceleration, name="sphere")


def curve_from_spec(spec: dict | str) -> GeneratingCurve:
    """Build a built-in curve from ``{"name": ..., **params}`` or a bare name."""
    if isinstance(spec, str):
        spec = {"name": spec}
    spec = dict(spec)
    name = spec.pop("name", None)
    if name == "sphere":
        if spec:
            raise GeometryError(f"sphere takes no parameters, got {sorted(spec)}")
        return sphere()
    if name == "star":
        return star(**spec)
    raise GeometryError(f"unknown curve {name!r}")


@dataclass(frozen=True)
class Panel:
    """Parameter interval ``[t_a, t_b]`` with ``n_pt`` Gauss-Legendre nodes."""

    t_a: float
    t_b: float
    n_pt: int = N_PT

    @property
    def delta(self) -> float:
        return 0.5 * (self.t_b - self.t_a)

    @property
    def center(self) -> float:
        return 0.5 * (self.t_b + self.t_a)

    @property
    def canonical_nodes(self) -> np.ndarray:
        return gauss_legendre(self.n_pt)[0]

    @property
    def canonical_weights(self) -> np.ndarray:
        return gauss_legendre(self.n_pt)[1]

    @property
    def nodes(self) -> np.ndarray:
        return self.center + self.delta * self.canonical_nodes

    @property
    def weights(self) -> np.ndarray:
        return self.delta * self.canonical_weights

    def canonical(self, t):
        """Map parameter values (real or complex) to canonical coordinates."""
        return (np.asarray(t) - self.center) / self.delta

    def with_order(self, n_pt: int) -> "Panel":
        return Panel(self.t_a, self.t_b, n_pt)


@dataclass(frozen=True)
class NodeSet:
    """Curve data sampled at a set of parameter values."""

    t: np.ndarray
    w: np.ndarray
    rc: np.ndarray
    z: np.ndarray
    drc: np.ndarray
    dz: np.ndarray
    d2rc: np.ndarray
    d2z: np.ndarray

    @property
    def s(self) -> np.ndarray:
        return np.hypot(self.drc, self.dz)

    @property
    def nu(self) -> tuple[np.ndarray, np.ndarray]:
        s = self.s
        return -self.dz / s, self.drc / s

    @property
    def tau(self) -> tuple[np.ndarray, np.ndarray]:
        s = self.s
        return self.drc / s, self.dz / s

    def __len__(self) -> int:
        return self.t.size


def sample_curve(curve: GeneratingCurve, t: np.ndarray, w: np.ndarray | None = None) -> NodeSet:
    t = np.asarray(t, dtype=float)
    rc, z = curve.position(t)
    drc, dz = curve.velocity(t)
    d2rc, d2z = curve.acceleration(t)
    arrays = [np.asarray(a, dtype=float) * np.ones_like(t) for a in (rc, z, drc, dz, d2rc, d2z)]
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise GeometryError(f"non-finite evaluation of curve {curve.name!r}")
    if w is None:
        w = np.zeros_like(t)
    return NodeSet(t, np.asarray(w, dtype=float), *arrays)


@dataclass(frozen=True)
class GlobalGrid:
    """The ``n_pt * n_pan`` Nystrom points on the generating curve."""

    curve: GeneratingCurve
    panels: tuple[Panel, ...]
    nodes: NodeSet
    panel_index: np.ndarray
    local_index: np.ndarray

    @property
    def n_pan(self) -> int:
        return len(self.panels)

    @property
    def n_pt(self) -> int:
        return self.panels[0].n_pt

    @property
    def m(self) -> int:
        return len(self.nodes)

    def panel_slice(self, p: int) -> slice:
        return slice(p * self.n_pt, (p + 1) * self.n_pt)

    def neighbors(self, p: int) -> list[int]:
        """Panels close to panel ``p``: itself and its neighbours along the open curve."""
        return [q for q in (p - 1, p, p + 1) if 0 <= q < self.n_pan]

    def panel_arclength(self, p: int) -> float:
        panel = self.panels[p]
        return float(np.sum(self.nodes.s[self.panel_slice(p)] * panel.weights))


def uniform_panels(curve: GeneratingCurve, n_pan: int, n_pt: int = N_PT) -> list[Panel]:
    t0, t1 = curve.t_range
    edges = np.linspace(t0, t1, n_pan + 1)
    return [Panel(float(a), float(b), n_pt) for a, b in zip(edges[:-1], edges[1:])]


def grid_from_panels(curve: GeneratingCurve, panels: Sequence[Panel]) -> GlobalGrid:
    t = np.concatenate([p.nodes for p in panels])
    w = np.concatenate([p.weights for p in panels])
    nodes = sample_curve(curve, t, w)
    n_pt = panels[0].n_pt
    idx = np.arange(t.size)
    return GlobalGrid(curve, tuple(panels), nodes, idx // n_pt, idx % n_pt)


def build_mesh(curve: GeneratingCurve, n_pan: int, n_pt: int = N_PT) -> tuple[list[Panel], GlobalGrid]:
    """Uniform-in-parameter panels and the corresponding global grid."""
    if int(n_pan) != n_pan or n_pan < 1:
        raise GeometryError(f"n_pan must be a positive integer, got {n_pan!r}")
    panels = uniform_panels(curve, int(n_pan), n_pt)
    grid = grid_from_panels(curve, panels)
    if np.any(grid.nodes.rc <= 0):
        raise GeometryError("generating curve must satisfy r_c > 0 between its endpoints")
    return panels, grid


def refine_panel_binary(panel: Panel, levels: int, direction: str = "toward-start") -> list[Panel]:
    """Repeatedly halve the sub-panel nearest one end of ``panel``.

    Returns ``levels + 1`` panels ordered by increasing parameter.
    """
    if not 0 <= levels <= MAX_BINARY_LEVELS:
        raise GeometryError(f"levels must lie in [0, {MAX_BINARY_LEVELS}], got {levels}")
    if direction not in ("toward-start", "toward-end"):
        raise GeometryError(f"unknown direction {direction!r}")
    a, b = panel.t_a, panel.t_b
    pieces = []
    for _ in range(levels):
        mid = 0.5 * (a + b)
        if direction == "toward-start":
            pieces.append(Panel(mid, b, panel.n_pt))
            b = mid
        else:
            pieces.append(Panel(a, mid, panel.n_pt))
            a = mid
    pieces.append(Panel(a, b, panel.n_pt))
    if direction == "toward-start":
        pieces.reverse()
    return pieces


def split_panel(panel: Panel, count: int, n_pt: int | None = None) -> list[Panel]:
    """Divide a panel into ``count`` equal parameter sub-panels."""
    edges = np.linspace(panel.t_a, panel.t_b, count + 1)
    order = panel.n_pt if n_pt is None else n_pt
    return [Panel(float(a), float(b), order) for a, b in zip(edges[:-1], edges[1:])]


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    x = np.asarray(nodes, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(diff == 0):
        raise GeometryError("interpolation nodes must be distinct")
    # Scale by the capacity of [-1, 1] to keep products O(1).
    return 1.0 / np.prod(2.0 * diff, axis=1)


def panel_interpolation_matrix(from_nodes, to_nodes) -> np.ndarray:
    """Matrix mapping samples at ``from_nodes`` to the interpolant at ``to_nodes``.

    Uses the second (true) barycentric formula; rows for target points that
    coincide with a source node are exact unit vectors.
    """
    x = np.asarray(from_nodes, dtype=float)
    y = np.asarray(to_nodes, dtype=float)
    if x.size > 32:
        raise GeometryError("at most 32 interpolation nodes are supported")
    lam = barycentric_weights(x)
    diff = y[:, None] - x[None, :]
    exact = diff == 0
    diff[exact] = 1.0
    c = lam[None, :] / diff
    mat = c / c.sum(axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    mat[rows] = exact[rows].astype(float)
    return mat
