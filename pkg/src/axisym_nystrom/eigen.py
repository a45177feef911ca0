"""Neumann eigenwavenumbers from peaks of the system-matrix condition number.

Near an eigenwavenumber ``k*`` the matrix ``I + 2 sqrt(2 pi) K`` of the
modal Neumann equation becomes nearly singular, so ``cond_2`` spikes.  The
search maximizes ``log cond_2`` over a narrow bracket with golden-section
search; the homogeneous density is the right singular vector belonging to
the smallest singular value.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import Discretization, Options, assemble

log = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
DEFAULT_REL_TOL = 1e-14
#: Relative gap between the two smallest singular values below which a warning is issued.
DEGENERACY_GAP = 1e-3
#: A maximum closer than this many tolerances to a bracket end counts as lying on it.
END_MARGIN = 10.0


class BracketError(ValueError):
    """The objective is not unimodal on the bracket."""


class DegenerateEigenspaceWarning(UserWarning):
    pass


@dataclass
class EigenSearchResult:
    bracket: tuple[float, float]
    k: float
    cond: float
    trace: list[tuple[float, float]] = field(default_factory=list)
    rho: np.ndarray | None = None
    converged: bool = False

    @property
    def evaluations(self) -> int:
        return len(self.trace)


def singular_values(A: np.ndarray) -> np.ndarray:
    return np.linalg.svd(A, compute_uv=False)


def condition_objective(curve_or_disc, n_pan: int | None = None, n: int = 0, k: float = 1.0,
                        N_ratio: float | None = None, opts: Options = Options()) -> float:
    """``cond_2`` of the system matrix from a full singular value decomposition."""
    system = assemble(curve_or_disc, n_pan, n, k, N_ratio, opts)
    s = singular_values(system.A)
    return float(s[0] / s[-1]) if s[-1] > 0 else math.inf


def golden_section_max(objective: Callable[[float], float], k_low: float, k_up: float,
                       tol_k: float | None = None, check_ends: bool = True,
                       max_iter: int = 500) -> EigenSearchResult:
    """Maximize ``objective`` on ``[k_low, k_up]`` by golden-section search.

    The search keeps a bracket ``[a, b]`` with two interior points and stops
    once ``b - a <= tol_k`` (default ``1e-14 * k_up``).  The value that is
    compared is ``log(objective)``; the argmax is unchanged.

    With ``check_ends`` the objective is also evaluated at the bracket ends,
    and :class:`BracketError` is raised when the located maximum lies below
    both end values, or when the search ran into an end whose value is not
    exceeded (a monotone objective).  Those two evaluations are recorded in ``trace`` after the
    search ones.
    """
    a, b = float(k_low), float(k_up)
    if not a < b:
        raise BracketError(f"need k_low < k_up, got [{a}, {b}]")
    if tol_k is None:
        tol_k = DEFAULT_REL_TOL * abs(b)
    if not tol_k > 0:
        raise ValueError("tol_k must be positive")
    trace: list[tuple[float, float]] = []

    def f(x):
        val = float(objective(x))
        trace.append((x, val))
        log.debug("objective(%.17g) = %.6e", x, val)
        return math.log(val) if val > 0 else -math.inf

    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol_k and it < max_iter:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            if c >= d:
                break
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            if d <= c:
                break
            fd = f(d)
    best, fbest = (c, fc) if fc >= fd else (d, fd)
    converged = b - a <= tol_k or b - a <= 4 * np.spacing(best)
    if check_ends:
        lo, hi = float(k_low), float(k_up)
        fa, fb = f(lo), f(hi)
        if fbest < min(fa, fb):
            raise BracketError(
                f"located maximum is below both ends of [{k_low}, {k_up}]; objective not unimodal")
        edge = END_MARGIN * max(tol_k, 4 * np.spacing(abs(best)))
        if (best - lo <= edge and fa >= fbest) or (hi - best <= edge and fb >= fbest):
            raise BracketError(f"objective increases towards an end of [{k_low}, {k_up}]; "
                               "no interior maximum")
    return EigenSearchResult((float(k_low), float(k_up)), best, math.exp(fbest), trace, None, converged)


def extract_homogeneous_density(A: np.ndarray, warn_gap: float = DEGENERACY_GAP):
    """Right singular vector of the smallest singular value of ``A``.

    Returns ``(rho, singular_values)``; ``rho`` has unit 2-norm.
    """
    _, s, vh = np.linalg.svd(A)
    if s.size > 1 and (s[-2] - s[-1]) <= warn_gap * s[-2]:
        warnings.warn(f"two smallest singular values {s[-2]:.3e}, {s[-1]:.3e} are within "
                      f"{warn_gap:g} relative; the null space may be degenerate",
                      DegenerateEigenspaceWarning, stacklevel=2)
    return vh[-1].conj(), s


def find_eigenwavenumber(disc: Discretization, n: int, k_low: float, k_up: float,
                         tol_k: float | None = None, check_ends: bool = True) -> EigenSearchResult:
    """Golden-section search for a mode-``n`` eigenwavenumber; attaches the homogeneous density."""
    res = golden_section_max(lambda k: condition_objective(disc, n=n, k=k), k_low, k_up,
                             tol_k, check_ends)
    rho, s = extract_homogeneous_density(assemble(disc, n=n, k=res.k).A)
    res.rho = rho
    res.cond = float(s[0] / s[-1])
    return res
