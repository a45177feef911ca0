"""Batch experiments: run configuration, convergence tables, field grids and CSV export.

Two experiment families are supported.  The point-source test solves the
modal Neumann problem with data generated by a source outside the body and
compares the computed field with the source field itself.  The eigen
experiment locates a Neumann eigenwavenumber on each mesh of a sweep,
normalizes the eigenfunction and estimates its error.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import oracles
from .assembly import Discretization, ModalSolution, assemble, solve_neumann
from .eigen import EigenSearchResult, find_eigenwavenumber
from .field import (FieldGrid, boundary_values, eval_field, eval_tangential_derivative, inside_region,
                    normalized_solution)
from .geometry import GeneratingCurve, GeometryError, GlobalGrid, curve_from_spec, panel_interpolation_matrix

log = logging.getLogger(__name__)

KINDS = ("solve", "eigensearch", "field-grid", "convergence-sweep")
TABLE_COLUMNS = ("n_pan", "points", "cond", "err_k", "err_u")
POINT_SOURCE_EXTRA = ("err_u_max", "err_boundary_l2", "err_tangential_l2")
GRID_COLUMNS = ("r_c", "z", "Re", "Im", "log10_error")
#: Ratio of discretization points of the reference run in the error-estimation protocol.
FINER_RATIO = 1.5


class ConfigError(ValueError):
    """Invalid run configuration."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Window:
    x: tuple[float, float] = (-1.2, 1.2)
    z: tuple[float, float] = (-1.1, 1.3)
    nx: int = 300
    nz: int = 300
    subsample: int | None = 1000
    seed: int = 0


@dataclass(frozen=True)
class Source:
    rc: float = 0.5
    z: float = 1.0
    strength: float = 5.0


@dataclass(frozen=True)
class Outputs:
    table: str | None = None
    field: str | None = None
    boundary: str | None = None


@dataclass(frozen=True)
class RunConfig:
    """One experiment.

    ``bracket`` selects the eigen family, otherwise the point-source family
    with wavenumber ``k`` is run.  ``sweep`` lists the meshes of a
    convergence sweep; the other kinds use ``n_pan``.
    """

    kind: str
    curve: dict = field(default_factory=lambda: {"name": "star", "amplitude": 0.25, "frequency": 5})
    n: int = 1
    k: float | None = None
    bracket: tuple[float, float] | None = None
    n_pan: int | None = None
    sweep: tuple[int, ...] | None = None
    N_ratio: float = 4.0
    source: Source = Source()
    window: Window | None = None
    reference_k: float | None = None
    sphere_index: tuple[int, int] | None = None
    tol_k: float | None = None
    estimate_error: bool = True
    outputs: Outputs = Outputs()

    @property
    def eigen(self) -> bool:
        return self.bracket is not None

    @property
    def meshes(self) -> tuple[int, ...]:
        return tuple(self.sweep) if self.kind == "convergence-sweep" else (int(self.n_pan),)

    def build_curve(self) -> GeneratingCurve:
        return curve_from_spec(self.curve)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        data = dict(data)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown configuration keys {unknown}")
        nested = {"source": Source, "window": Window, "outputs": Outputs}
        for key, typ in nested.items():
            if data.get(key) is not None:
                data[key] = _nested(typ, data[key], key)
        for key in ("bracket", "sweep", "sphere_index"):
            if data.get(key) is not None:
                if not isinstance(data[key], (list, tuple)):
                    raise ConfigError(f"{key} must be a list")
                data[key] = tuple(data[key])
        if "kind" not in data:
            raise ConfigError("configuration needs a 'kind'")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        """Check types and ranges; raises :class:`ConfigError`.  Does no numerical work."""
        if isinstance(self.kind, (list, tuple)) or self.kind not in KINDS:
            raise ConfigError(f"kind must be exactly one of {KINDS}, got {self.kind!r}")
        try:
            curve = self.build_curve()
        except (GeometryError, TypeError) as exc:
            raise ConfigError(f"bad curve spec {self.curve!r}: {exc}") from exc
        _int(self.n, "n")
        if not (isinstance(self.N_ratio, (int, float)) and self.N_ratio > 0 and math.isfinite(self.N_ratio)):
            raise ConfigError(f"N_ratio must be a positive number, got {self.N_ratio!r}")
        if self.kind == "convergence-sweep":
            if not self.sweep:
                raise ConfigError("convergence-sweep needs a non-empty 'sweep' list")
            for v in self.sweep:
                _int(v, "sweep entry", 1)
            if any(b <= a for a, b in zip(self.sweep, self.sweep[1:])):
                raise ConfigError(f"sweep must be strictly increasing, got {list(self.sweep)}")
        else:
            if self.n_pan is None:
                raise ConfigError(f"kind {self.kind!r} needs 'n_pan'")
            _int(self.n_pan, "n_pan", 1)
        for n_pan in self.meshes:
            if abs(self.n) > round(self.N_ratio * n_pan):
                raise ConfigError(f"|n|={abs(self.n)} exceeds N = N_ratio * n_pan = "
                                  f"{round(self.N_ratio * n_pan)} for n_pan={n_pan}")
        if self.kind == "eigensearch" and self.bracket is None:
            raise ConfigError("eigensearch needs a 'bracket'")
        if self.bracket is not None:
            if len(self.bracket) != 2:
                raise ConfigError("bracket must be [k_low, k_up]")
            lo, hi = (_positive(v, "bracket end") for v in self.bracket)
            if not lo < hi:
                raise ConfigError(f"bracket must satisfy 0 < k_low < k_up, got {list(self.bracket)}")
            if self.k is not None:
                raise ConfigError("give either 'k' (point-source run) or 'bracket' (eigen run), not both")
        else:
            if self.k is None:
                raise ConfigError("point-source runs need a wavenumber 'k'")
            _positive(self.k, "k")
            s = self.source
            for v, name in ((s.rc, "source.rc"), (s.z, "source.z"), (s.strength, "source.strength")):
                _finite(v, name)
            if s.rc <= 0:
                raise ConfigError("source.rc must be positive (off the symmetry axis)")
            inside, dist = inside_region(curve, np.array([s.rc]), np.array([s.z]))
            if inside[0] or dist[0] <= 0:
                raise ConfigError(f"point source ({s.rc}, {s.z}) must lie outside the body")
        if self.reference_k is not None:
            _positive(self.reference_k, "reference_k")
        if self.sphere_index is not None:
            if len(self.sphere_index) != 2:
                raise ConfigError("sphere_index must be [ell, m]")
            _int(self.sphere_index[0], "ell", 0)
            _int(self.sphere_index[1], "m", 1)
        if self.tol_k is not None:
            _positive(self.tol_k, "tol_k")
        w = self.window
        if w is not None:
            for name in ("x", "z"):
                r = getattr(w, name)
                if len(r) != 2 or not all(math.isfinite(float(v)) for v in r) or not r[0] < r[1]:
                    raise ConfigError(f"window.{name} must be an increasing pair, got {r!r}")
            _int(w.nx, "window.nx", 1)
            _int(w.nz, "window.nz", 1)
            if w.subsample is not None:
                _int(w.subsample, "window.subsample", 1)
            _int(w.seed, "window.seed", 0)


def _nested(typ, value, key):
    if isinstance(value, typ):
        return value
    if not isinstance(value, dict):
        raise ConfigError(f"{key} must be an object")
    names = {f.name for f in dataclasses.fields(typ)}
    unknown = sorted(set(value) - names)
    if unknown:
        raise ConfigError(f"unknown {key} keys {unknown}")
    value = {k: tuple(v) if isinstance(v, list) else v for k, v in value.items()}
    return typ(**value)


def _int(v, name, minimum=None):
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {v}")
    return int(v)


def _finite(v, name):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name} must be a finite number, got {v!r}")
    return float(v)


def _positive(v, name):
    v = _finite(v, name)
    if not v > 0:
        raise ConfigError(f"{name} must be positive, got {v}")
    return v


# ---------------------------------------------------------------------------
# Tables and grids
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceTable:
    """Rows of ``n_pan, points, cond, err_k, err_u`` followed by optional extra columns."""

    columns: tuple[str, ...] = TABLE_COLUMNS
    rows: list[tuple] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([row[j] for row in self.rows], dtype=float)

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class FieldRecords:
    """Field values on grid points with a pointwise error (true or estimated).

    ``rc`` is the signed coordinate of the meridian plane: negative values
    lie in the half-plane ``theta = pi``, where ``u`` includes ``exp(i n pi)``.
    """

    rc: np.ndarray
    z: np.ndarray
    u: np.ndarray
    error: np.ndarray

    @property
    def log10_error(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log10(self.error)

    @property
    def rows(self) -> list[tuple]:
        return list(zip(self.rc, self.z, self.u.real, self.u.imag, self.log10_error))

    @property
    def columns(self) -> tuple[str, ...]:
        return GRID_COLUMNS


def format_value(v) -> str:
    """Integers verbatim, floats with 17 significant digits."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def export(data, path: str | Path) -> Path:
    """Write a :class:`ConvergenceTable`, :class:`FieldRecords` or ``(columns, rows)`` as CSV."""
    if isinstance(data, tuple) and len(data) == 2:
        columns, rows = data
    else:
        columns, rows = data.columns, data.rows
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read back a file written by :func:`export` as (header, float array)."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def curve_l2(grid: GlobalGrid, values) -> float:
    """``(int |v|^2 d gamma)^{1/2}`` by the grid quadrature."""
    w = grid.nodes.s * grid.nodes.w
    return float(np.sqrt(np.sum(np.abs(values) ** 2 * w)))


def interpolate_on_curve(grid: GlobalGrid, values, t) -> np.ndarray:
    """Panelwise polynomial interpolant of grid values at parameters ``t``."""
    values = np.asarray(values)
    t = np.asarray(t, dtype=float)
    edges = np.array([p.t_a for p in grid.panels] + [grid.panels[-1].t_b])
    owner = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, grid.n_pan - 1)
    out = np.empty(t.shape, dtype=values.dtype)
    for p in np.unique(owner):
        sel = owner == p
        panel = grid.panels[p]
        M = panel_interpolation_matrix(panel.canonical_nodes, panel.canonical(t[sel]))
        out[sel] = M @ values[grid.panel_slice(p)]
    return out


def field_points(curve: GeneratingCurve, window: Window | None) -> FieldGrid:
    window = window or Window()
    grid = FieldGrid.from_window(curve, window.x, window.z, window.nx, window.nz)
    if window.subsample is not None:
        grid = grid.subsample(window.subsample, window.seed)
    return grid


def mean_panel_length(grid: GlobalGrid) -> float:
    return float(np.mean([grid.panel_arclength(p) for p in range(grid.n_pan)]))


def near_boundary_ratio(records: FieldRecords, distance, panel_length: float) -> float:
    """Largest error within one panel length of the curve over the mean error farther in."""
    distance = np.asarray(distance)
    near = distance < panel_length
    if not np.any(near) or np.all(near):
        return 0.0
    far_mean = float(np.mean(records.error[~near]))
    return float(np.max(records.error[near]) / far_mean) if far_mean > 0 else math.inf


def convergence_order(n_pan: Sequence[int], errors: Sequence[float], floor_factor: float = 100.0) -> float:
    """Least-squares slope of ``-log(error)`` against ``log(n_pan)`` before the error floor.

    The pre-floor range runs from the first entry up to the first one whose
    error is within ``floor_factor`` of the smallest error of the sweep.
    """
    n_pan = np.asarray(n_pan, dtype=float)
    err = np.asarray(errors, dtype=float)
    if n_pan.size != err.size or n_pan.size < 2:
        raise ValueError("need at least two (n_pan, error) pairs")
    positive = err > 0
    floor = err[positive].min() if np.any(positive) else 0.0
    stop = int(np.argmax(err <= floor_factor * floor)) if floor > 0 else n_pan.size - 1
    stop = max(stop, 1)
    sel = slice(0, stop + 1)
    x, y = np.log(n_pan[sel]), np.log(err[sel])
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# Point-source experiment
# ---------------------------------------------------------------------------

@dataclass
class PointSourceResult:
    table: ConvergenceTable
    grid: FieldRecords | None
    targets: FieldGrid | None
    solution: ModalSolution
    near_ratio: float = 0.0


def point_source_solution(disc: Discretization, source: oracles.PointSource, k: float,
                          n: int) -> tuple[ModalSolution, float]:
    """Solve the modal Neumann problem whose data are the normal derivative of the source field.

    Returns the solution and ``cond_2`` of the system matrix.
    """
    _, f, _ = source.boundary_data(disc.grid, k, n)
    system = assemble(disc, n=n, k=k)
    sol = solve_neumann(system, f)
    return sol, float(np.linalg.cond(system.A))


def run_point_source_experiment(config: RunConfig, with_field: bool = True) -> PointSourceResult:
    """Convergence of the point-source test over the meshes of ``config``.

    ``err_u`` is the average absolute field error on the field points,
    ``err_k`` is ``nan``.  The extra columns hold the largest field error and
    the relative L2 errors on the curve of ``u`` and of its tangential derivative.
    """
    config.validate()
    if config.eigen:
        raise ConfigError("point-source experiment needs 'k', not 'bracket'")
    curve = config.build_curve()
    src = oracles.PointSource(config.source.rc, config.source.z, config.source.strength)
    targets = field_points(curve, config.window) if with_field else None
    ref = src.field(targets.rc, targets.z, config.k, config.n) if with_field else None
    table = ConvergenceTable(TABLE_COLUMNS + POINT_SOURCE_EXTRA)
    records = None
    sol = None
    for n_pan in config.meshes:
        disc = Discretization.build(curve, n_pan, config.N_ratio)
        sol, cond = point_source_solution(disc, src, config.k, config.n)
        u_ref, _, t_ref = src.boundary_data(disc.grid, config.k, config.n)
        u_b = boundary_values(sol)
        t_b = eval_tangential_derivative(sol)
        e_b = _relative(curve_l2(disc.grid, u_b - u_ref), curve_l2(disc.grid, u_ref))
        e_t = _relative(curve_l2(disc.grid, t_b - t_ref), curve_l2(disc.grid, t_ref))
        if with_field:
            u = eval_field(sol, targets)
            err = np.abs(u - ref)
            records = FieldRecords(targets.x, targets.z, u * _azimuthal_factor(targets, config.n), err)
            e_avg, e_max = float(err.mean()) if err.size else 0.0, float(err.max()) if err.size else 0.0
        else:
            e_avg = e_max = math.nan
        table.rows.append((n_pan, disc.grid.m, cond, math.nan, e_avg, e_max, e_b, e_t))
        log.info("point source n_pan=%d: avg err %.3e, boundary %.3e", n_pan, e_avg, e_b)
    ratio = 0.0
    if with_field and records is not None:
        ratio = near_boundary_ratio(records, targets.distance, mean_panel_length(sol.disc.grid))
    return PointSourceResult(table, records, targets, sol, ratio)


def _azimuthal_factor(targets: FieldGrid, n: int) -> np.ndarray:
    """``exp(i n theta)``: maps modal values to the field in the plane ``theta = 0, pi``."""
    return np.where(targets.x < 0, (-1.0) ** n, 1.0)


def _relative(a: float, b: float) -> float:
    return a / b if b > 0 else a


# ---------------------------------------------------------------------------
# Eigen experiment
# ---------------------------------------------------------------------------

@dataclass
class EigenRun:
    """Eigenwavenumber search and normalized eigenfunction on one mesh."""

    search: EigenSearchResult
    solution: ModalSolution
    u: np.ndarray

    @property
    def grid(self) -> GlobalGrid:
        return self.solution.disc.grid


@dataclass
class EigenExperimentResult:
    search: EigenSearchResult
    table: ConvergenceTable
    grid: FieldRecords | None
    runs: list[EigenRun]
    reference: EigenRun | None = None


def eigen_run(curve: GeneratingCurve, n_pan: int, config: RunConfig) -> EigenRun:
    disc = Discretization.build(curve, n_pan, config.N_ratio)
    lo, hi = config.bracket
    res = find_eigenwavenumber(disc, config.n, lo, hi, config.tol_k)
    raw = ModalSolution(config.n, res.k, res.rho, np.zeros_like(res.rho), disc)
    sol, ef = normalized_solution(raw)
    log.info("eigen n_pan=%d: k=%.16g cond=%.3e (%d evaluations)", n_pan, res.k, res.cond, res.evaluations)
    return EigenRun(res, sol, ef.u)


def finer_mesh(n_pan: int) -> int:
    """Mesh with approximately 50 per cent more discretization points."""
    return max(n_pan + 1, int(math.ceil(FINER_RATIO * n_pan)))


def _sphere_case(config: RunConfig, curve: GeneratingCurve) -> bool:
    return curve.name == "sphere" and config.n == 1 and (
        config.sphere_index is None or config.sphere_index[0] == 1)


def run_eigen_experiment(config: RunConfig, with_field: bool = True) -> EigenExperimentResult:
    """Eigenwavenumber search on each mesh with normalized eigenfunctions.

    ``err_k`` is measured against, in order of preference, ``reference_k``,
    the oracle value of ``sphere_index`` (sphere only) or the search on the
    reference mesh.  ``err_u`` is the L2 error on the curve of the normalized
    boundary values: against the analytic profile for the ``ell = 1``, ``n = 1``
    sphere modes, otherwise against the reference run interpolated to the
    mesh.  The reference run uses about 50 per cent more points than the
    finest mesh; its field difference is the estimated pointwise error of
    the exported field grid.
    """
    config.validate()
    if not config.eigen:
        raise ConfigError("eigen experiment needs a 'bracket'")
    curve = config.build_curve()
    k_ref = config.reference_k
    if k_ref is None and config.sphere_index is not None and curve.name == "sphere":
        k_ref = oracles.sphere_bessel_reference(*config.sphere_index)
    analytic = _sphere_case(config, curve)

    runs = [eigen_run(curve, n_pan, config) for n_pan in config.meshes]
    reference = None
    if config.estimate_error and not analytic:
        reference = eigen_run(curve, finer_mesh(config.meshes[-1]), config)
    k_cmp = k_ref if k_ref is not None else (reference.search.k if reference else math.nan)

    table = ConvergenceTable()
    for run in runs:
        g = run.grid
        if analytic:
            u_exact = oracles.sphere_eigenfunction_profile(run.search.k, g.nodes.t)
            err_u = curve_l2(g, run.u - u_exact)
        elif reference is not None:
            u_fine = interpolate_on_curve(reference.grid, reference.u, g.nodes.t)
            err_u = curve_l2(g, run.u - u_fine)
        else:
            err_u = math.nan
        err_k = abs(run.search.k - k_cmp) / k_cmp
        table.rows.append((g.n_pan, g.m, run.search.cond, err_k, err_u))

    records = None
    if with_field:
        targets = field_points(curve, config.window)
        u = np.real(eval_field(runs[-1].solution, targets))
        if analytic:
            err = np.abs(u - oracles.sphere_eigenfunction_field(runs[-1].search.k, targets.rc, targets.z))
        elif reference is not None:
            err = np.abs(u - np.real(eval_field(reference.solution, targets)))
        else:
            err = np.full(u.shape, math.nan)
        records = FieldRecords(targets.x, targets.z, u * _azimuthal_factor(targets, config.n), err)
    return EigenExperimentResult(runs[-1].search, table, records, runs, reference)
