"""Independent reference solutions: sphere eigenwavenumbers and point-source fields."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GlobalGrid
from .kernels import Points, modal_kernels_fft

#: Azimuthal resolution of the reference trapezoidal transforms.
REFERENCE_N = 512


class OracleError(ValueError):
    pass


def spherical_bessel_j(ell: int, x: float) -> float:
    """``j_ell(x)`` for ``x > 0``: upward recurrence when ``x > ell``, Miller's method otherwise."""
    if ell < 0:
        raise OracleError("ell must be non-negative")
    x = float(x)
    if x <= 0:
        raise OracleError("spherical_bessel_j needs x > 0")
    j0 = math.sin(x) / x
    if ell == 0:
        return j0
    if x > ell:
        jm, j = j0, math.sin(x) / (x * x) - math.cos(x) / x
        for l in range(1, ell):
            jm, j = j, (2 * l + 1) / x * j - jm
        return j
    top = ell + int(math.sqrt(40.0 * max(ell, 10))) + 20
    jp, j = 0.0, 1e-300
    val = 0.0
    for l in range(top, 0, -1):
        jp, j = j, (2 * l + 1) / x * j - jp
        if abs(j) > 1e250:
            jp *= 1e-250
            j *= 1e-250
            val *= 1e-250
        if l - 1 == ell:
            val = j
    # j now holds the unnormalized j_0.
    return val * j0 / j


def spherical_bessel_jp(ell: int, x: float) -> float:
    """``d j_ell / dx``."""
    if ell == 0:
        return -spherical_bessel_j(1, x)
    return spherical_bessel_j(ell - 1, x) - (ell + 1) / x * spherical_bessel_j(ell, x)


def _bisect(f, a: float, b: float) -> float:
    fa = f(a)
    for _ in range(200):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        fm = f(m)
        if fm == 0:
            return m
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def sphere_bessel_reference(ell: int, m: int, step: float = 0.05) -> float:
    """The ``m``-th positive root of ``j_ell'`` (a Neumann eigenwavenumber of the unit ball)."""
    if ell < 0 or m < 1:
        raise OracleError(f"need ell >= 0 and m >= 1, got ({ell}, {m})")
    f = lambda x: spherical_bessel_jp(ell, x)
    x = 1e-3
    fx = f(x)
    found = 0
    limit = ell + 4 * math.pi * (m + 2) + 10
    while x < limit:
        y = x + step
        fy = f(y)
        if fx == 0 or (fx < 0) != (fy < 0):
            found += 1
            if found == m:
                return _bisect(f, x, y)
        x, fx = y, fy
    raise OracleError(f"root search for (ell={ell}, m={m}) failed below x={limit}")


def sphere_eigenfunction_profile(k: float, t) -> np.ndarray:
    """Normalized real boundary profile of the ``n = 1, ell = 1`` sphere eigenfunction."""
    return math.sqrt(3.0) * k / math.sqrt(2 * k * k - 4) * np.sin(np.asarray(t))


@dataclass(frozen=True)
class PointSource:
    """Field ``strength * S(r, r_p)`` of a point source on the axis-plane point ``(rc, z)``."""

    rc: float
    z: float
    strength: float = 5.0

    def _points(self, count: int) -> Points:
        return Points(np.full(count, self.rc), np.full(count, self.z))

    def field(self, rc, z, k: float, n: int, N: int = REFERENCE_N) -> np.ndarray:
        rc = np.atleast_1d(np.asarray(rc, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        vals = modal_kernels_fft(Points(rc, z), self._points(rc.size), k, n, N, ("S",))["S"]
        return self.strength * vals

    def boundary_data(self, grid: GlobalGrid, k: float, n: int, N: int = REFERENCE_N):
        """``u``, ``nu . grad u`` and ``tau . grad u`` at the grid points."""
        tgt = Points.from_nodes(grid.nodes)
        vals = modal_kernels_fft(tgt, self._points(grid.m), k, n, N)
        return tuple(self.strength * vals[key] for key in ("S", "Knu", "Ktau"))


def sphere_eigenfunction_field(k: float, rc, z) -> np.ndarray:
    """Interior continuation of :func:`sphere_eigenfunction_profile` (``n = 1``, ``ell = 1``).

    ``u = A j_1(k rho) r_c / rho`` with ``rho = |(r_c, z)|`` and ``A`` chosen
    so that the boundary trace matches the profile.
    """
    rc = np.asarray(rc, dtype=float)
    z = np.asarray(z, dtype=float)
    rho = np.hypot(rc, z)
    amp = math.sqrt(3.0) * k / math.sqrt(2 * k * k - 4) / spherical_bessel_j(1, k)
    x = k * np.maximum(rho, 1e-300)
    small = x < 1e-3
    j1 = np.where(small, x / 3 - x ** 3 / 30, (np.sin(x) / x - np.cos(x)) / np.where(small, 1.0, x))
    sin_phi = np.where(rho > 0, rc / np.maximum(rho, 1e-300), 0.0)
    return amp * j1 * sin_phi


ORACLE_KINDS = ("point-source", "sphere-analytic")


@dataclass(frozen=True)
class ReferenceOracle:
    """A reference solution, either a point source or a unit-ball eigenpair.

    Parameters
    ----------
    kind : str
        ``"point-source"`` or ``"sphere-analytic"``.
    source : PointSource, optional
        Source of a ``"point-source"`` oracle.
    ell, m : int
        Bessel order and root index of a ``"sphere-analytic"`` oracle.
    """

    kind: str
    source: PointSource | None = None
    ell: int = 1
    m: int = 1

    def __post_init__(self):
        if self.kind not in ORACLE_KINDS:
            raise OracleError(f"oracle kind must be one of {ORACLE_KINDS}, got {self.kind!r}")
        if self.kind == "point-source" and self.source is None:
            raise OracleError("a point-source oracle needs a source")

    def eigenwavenumber(self) -> float:
        """Root ``k_{ell,m}`` of ``j_ell'`` (sphere-analytic only)."""
        if self.kind != "sphere-analytic":
            raise OracleError("only the sphere-analytic oracle has an eigenwavenumber")
        return sphere_bessel_reference(self.ell, self.m)

    def field(self, rc, z, k: float | None = None, n: int = 1) -> np.ndarray:
        """Reference modal field at ``(rc, z)``.

        The point-source field needs ``k`` and ``n``.  The sphere field is the
        normalized ``ell = 1``, ``n = 1`` eigenfunction at its own wavenumber.
        """
        if self.kind == "point-source":
            if k is None:
                raise OracleError("the point-source field needs a wavenumber")
            return self.source.field(rc, z, k, n)
        if self.ell != 1 or n != 1:
            raise OracleError("the analytic sphere field covers ell = 1, n = 1 only")
        return sphere_eigenfunction_field(self.eigenwavenumber(), rc, z)
