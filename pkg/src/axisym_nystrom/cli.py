"""Command-line driver: ``axisym-nystrom {solve,eigensearch,field,sweep,oracle}``.

Each verb reads an optional JSON configuration (see :class:`RunConfig`),
applies command-line overrides, validates the result and runs one
experiment.  Tables are written as CSV to the configured paths, or to
standard output when no path is given.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 numerical
failure (singular system, bad bracket, ...), 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import oracles
from .assembly import AssemblyError, SingularSystemError
from .eigen import BracketError
from .experiments import (ConfigError, ConvergenceTable, RunConfig, export, format_value,
                          run_eigen_experiment, run_point_source_experiment)
from .field import FieldError, boundary_values
from .geometry import GeometryError
from .quadrature import QuadratureError
from .specfun import SpecialFunctionError

__all__ = ["main", "build_parser", "config_from_args", "RunConfig", "run_point_source_experiment",
           "run_eigen_experiment", "export", "sphere_bessel_reference"]

sphere_bessel_reference = oracles.sphere_bessel_reference

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
VERB_KIND = {"solve": "solve", "eigensearch": "eigensearch", "field": "field-grid",
             "sweep": "convergence-sweep"}
BOUNDARY_COLUMNS = ("t", "r_c", "z", "Re_rho", "Im_rho", "Re_u", "Im_u", "abs_error")

log = logging.getLogger("axisym_nystrom")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--curve", choices=("star", "sphere"), help="built-in generating curve")
    p.add_argument("--amplitude", type=float, help="star amplitude")
    p.add_argument("--frequency", type=int, help="star frequency")
    p.add_argument("--n", type=int, help="azimuthal mode")
    p.add_argument("--k", type=float, help="wavenumber (point-source runs)")
    p.add_argument("--bracket", type=float, nargs=2, metavar=("K_LOW", "K_UP"),
                   help="eigenwavenumber bracket")
    p.add_argument("--n-pan", type=int, help="number of panels")
    p.add_argument("--sweep", type=int, nargs="+", help="strictly increasing panel counts")
    p.add_argument("--N-ratio", type=float, help="azimuthal resolution per panel")
    p.add_argument("--source", type=float, nargs=3, metavar=("RC", "Z", "STRENGTH"),
                   help="point source position and strength")
    p.add_argument("--window-size", type=int, nargs=2, metavar=("NX", "NZ"), help="field grid size")
    p.add_argument("--subsample", type=int, help="random subsample of the field grid (0 keeps all)")
    p.add_argument("--reference-k", type=float, help="reference eigenwavenumber for err_k")
    p.add_argument("--sphere-index", type=int, nargs=2, metavar=("ELL", "M"),
                   help="sphere eigenwavenumber index for the oracle reference")
    p.add_argument("--tol-k", type=float, help="golden-section tolerance in k")
    p.add_argument("--no-estimate", action="store_true", help="skip the finer reference run")
    p.add_argument("--table", help="output CSV for the convergence table")
    p.add_argument("--field", help="output CSV for the field grid")
    p.add_argument("--boundary", help="output CSV for boundary values (solve)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="axisym-nystrom",
                     description="Fourier-Nystrom solver for Helmholtz Neumann problems on bodies of revolution")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for verb, text in (("solve", "solve one point-source Neumann problem"),
                       ("eigensearch", "locate a Neumann eigenwavenumber"),
                       ("field", "evaluate a field grid"),
                       ("sweep", "convergence sweep over panel counts")):
        _add_run_flags(sub.add_parser(verb, help=text))
    o = sub.add_parser("oracle", help="independent reference values")
    o.add_argument("kind", choices=("sphere-analytic", "point-source"))
    o.add_argument("--ell", type=int, default=1)
    o.add_argument("--m", type=int, nargs="+", default=[1], help="root indices")
    o.add_argument("--k", type=float, default=19.0)
    o.add_argument("--n", type=int, default=1)
    o.add_argument("--source", type=float, nargs=3, default=(0.5, 1.0, 5.0), metavar=("RC", "Z", "STRENGTH"))
    o.add_argument("--points", type=float, nargs="+", metavar="RC_Z",
                   help="flat list of evaluation points rc1 z1 rc2 z2 ...")
    o.add_argument("--output", help="output CSV (default: standard output)")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Merge the JSON file (if any) with command-line overrides."""
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
    kind = VERB_KIND[args.verb]
    if data.get("kind", kind) != kind:
        raise ConfigError(f"config kind {data['kind']!r} does not match verb {args.verb!r}")
    data["kind"] = kind
    if args.curve is not None:
        data["curve"] = {"name": args.curve}
    if args.amplitude is not None or args.frequency is not None:
        curve = dict(data.get("curve", {"name": "star"}))
        if args.amplitude is not None:
            curve["amplitude"] = args.amplitude
        if args.frequency is not None:
            curve["frequency"] = args.frequency
        data["curve"] = curve
    simple = {"n": args.n, "k": args.k, "bracket": args.bracket, "n_pan": args.n_pan,
              "sweep": args.sweep, "N_ratio": args.N_ratio, "reference_k": args.reference_k,
              "sphere_index": args.sphere_index, "tol_k": args.tol_k}
    data.update({key: v for key, v in simple.items() if v is not None})
    if args.no_estimate:
        data["estimate_error"] = False
    if args.source is not None:
        data["source"] = dict(zip(("rc", "z", "strength"), args.source))
    if args.window_size is not None or args.subsample is not None:
        window = dict(data.get("window") or {})
        if args.window_size is not None:
            window["nx"], window["nz"] = args.window_size
        if args.subsample is not None:
            window["subsample"] = args.subsample or None
        data["window"] = window
    outputs = dict(data.get("outputs") or {})
    for key in ("table", "field", "boundary"):
        if getattr(args, key) is not None:
            outputs[key] = getattr(args, key)
    data["outputs"] = outputs
    return RunConfig.from_dict(data)


def _write(data, path, out) -> None:
    if path:
        export(data, path)
        log.info("wrote %s", path)
    else:
        columns, rows = data if isinstance(data, tuple) else (data.columns, data.rows)
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def _run_solve(cfg: RunConfig, out) -> None:
    if cfg.eigen:
        raise ConfigError("solve needs 'k'; use eigensearch for a bracket")
    result = run_point_source_experiment(cfg, with_field=cfg.outputs.field is not None)
    sol = result.solution
    grid = sol.disc.grid
    src = oracles.PointSource(cfg.source.rc, cfg.source.z, cfg.source.strength)
    u = boundary_values(sol)
    u_ref = src.boundary_data(grid, cfg.k, cfg.n)[0]
    nodes = grid.nodes
    rows = list(zip(nodes.t, nodes.rc, nodes.z, sol.rho.real, sol.rho.imag, u.real, u.imag, np.abs(u - u_ref)))
    _write((BOUNDARY_COLUMNS, rows), cfg.outputs.boundary, out)
    if cfg.outputs.table:
        export(result.table, cfg.outputs.table)
    if cfg.outputs.field and result.grid is not None:
        export(result.grid, cfg.outputs.field)
    print(f"# residual {sol.residual:.3e}, cond {result.table.rows[-1][2]:.6g}", file=sys.stderr)


def _run_experiment(cfg: RunConfig, out, want_field: bool) -> None:
    if cfg.eigen:
        result = run_eigen_experiment(cfg, with_field=want_field)
        s = result.search
        print(f"# k = {s.k:.16g}, cond = {s.cond:.6g}, evaluations = {s.evaluations}, "
              f"converged = {s.converged}", file=sys.stderr)
    else:
        result = run_point_source_experiment(cfg)
        if result.grid is not None:
            print(f"# near-boundary error ratio {result.near_ratio:.3g}", file=sys.stderr)
    table: ConvergenceTable = result.table
    if cfg.kind == "field-grid":
        _write(result.grid, cfg.outputs.field, out)
        if cfg.outputs.table:
            export(table, cfg.outputs.table)
    else:
        _write(table, cfg.outputs.table, out)
        if cfg.outputs.field and result.grid is not None:
            export(result.grid, cfg.outputs.field)


def _run_oracle(args, out) -> None:
    if args.kind == "sphere-analytic":
        rows = [(args.ell, m, oracles.ReferenceOracle("sphere-analytic", ell=args.ell, m=m).eigenwavenumber())
                for m in args.m]
        _write((("ell", "m", "k"), rows), args.output, out)
        return
    if not args.points or len(args.points) % 2:
        raise ConfigError("point-source oracle needs --points rc1 z1 [rc2 z2 ...]")
    pts = np.asarray(args.points, dtype=float).reshape(-1, 2)
    if np.any(pts[:, 0] < 0):
        raise ConfigError("oracle points need rc >= 0")
    oracle = oracles.ReferenceOracle("point-source", source=oracles.PointSource(*args.source))
    u = oracle.field(pts[:, 0], pts[:, 1], args.k, args.n)
    rows = list(zip(pts[:, 0], pts[:, 1], u.real, u.imag))
    _write((("r_c", "z", "Re", "Im"), rows), args.output, out)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        if args.verb == "oracle":
            _run_oracle(args, out)
            return EXIT_OK
        cfg = config_from_args(args)
        if args.verb == "solve":
            _run_solve(cfg, out)
        elif args.verb == "field":
            _run_experiment(cfg, out, want_field=True)
        else:
            _run_experiment(cfg, out, want_field=cfg.outputs.field is not None)
    except (ConfigError, GeometryError, oracles.OracleError) as exc:
        print(f"axisym-nystrom: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularSystemError, BracketError, FieldError, AssemblyError, QuadratureError,
            SpecialFunctionError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"axisym-nystrom: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"axisym-nystrom: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
