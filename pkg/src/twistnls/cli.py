"""
Command line entry point.

Usage::

    twistnls COMMAND [--config FILE] [options]

Commands are ``solve``, ``exponents``, ``verify KIND`` and ``uniqueness``.
Parameters come from an optional INI file and are overridden by flags.
Every run writes a JSON report ``{"header": {...}, "body": {...}}`` to the
output directory; only the header carries the timestamp, so the body is
byte-identical across reruns of the same configuration.

Exit codes: 0 success, 2 usage error or hypothesis rejection, 3 runtime
failure.
"""

import argparse
import configparser
import csv
import datetime
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SolverError
from .estimate_lab import (
    DECAY_EXPONENTS,
    SampleSpec,
    check_decay_embedding,
    check_duhamel_weighted,
    check_fefferman_stein,
    check_fractional_leibniz,
    check_homogeneous_strichartz,
    check_inhomogeneous_strichartz,
    check_trilinear,
    uniqueness_experiment,
)
from .exponents import format_exponent, main_exponents, to_fraction, validate_main_tuple
from .norms import sobolev_norm
from .picard_solver import SolverConfig, continue_solution, picard_solve
from .spectral_core import Grid, SpatialField

EXIT_OK, EXIT_REJECTED, EXIT_FAILED = 0, 2, 3

VERIFY_KINDS = ("decay", "strichartz", "fefferman-stein", "duhamel", "trilinear", "leibniz",
                "uniqueness")

# option name -> (section, type, default)
OPTIONS = {
    "p": ("model", "exponent", None),
    "s": ("model", "exponent", None),
    "grid_n": ("grid", int, 512),
    "length": ("grid", float, 40 * math.pi),
    "profile": ("data", str, "sech"),
    "amplitude": ("data", float, math.sqrt(2)),
    "wavenumber": ("data", int, 0),
    "T_max": ("solver", float, 0.1),
    "T_policy": ("solver", str, "fixed"),
    "tol": ("solver", float, 1e-10),
    "max_iter": ("solver", int, 30),
    "time_nodes": ("solver", int, 17),
    "intervals": ("solver", int, 1),
    "seed": ("sample", int, 0),
    "count": ("sample", int, 100),
    "band_limit": ("sample", int, 12),
    "decay": ("sample", float, 1.1),
    "sample_grid_n": ("sample", int, 128),
    "sample_length": ("sample", float, 8 * math.pi),
    "window": ("sample", float, 1.0),
    "sample_time_nodes": ("sample", int, 65),
    "refine": ("sample", "bool", True),
    "workers": ("sample", int, 1),
    "q": ("exponents", "exponent", None),
    "r": ("exponents", "exponent", None),
    "rho": ("exponents", "exponent", None),
    "T_list": ("exponents", "floats", None),
    "out": ("output", str, "twistnls-out"),
    "format": ("output", str, "json"),
}

CSV_SCHEMAS = {
    "summary": ["name", "in_hypothesis", "max_ratio", "median_ratio", "empirical_constant",
                "refinement_drift"],
    "ratios": ["name", "sample", "ratio"],
    "snapshots": ["t", "x", "re", "im"],
    "values": ["key", "value"],
}


class UsageError(Exception):
    pass


# -- parameter handling --------------------------------------------------------


def _convert(name, kind, raw):
    try:
        if kind == "exponent":
            return to_fraction(raw)
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            return [float(v) for v in str(raw).replace(",", " ").split()]
        return kind(raw)
    except (ValueError, TypeError, ZeroDivisionError):
        raise UsageError(f"{name}: cannot parse {raw!r}") from None


def read_config(path):
    """Parse an INI file into ``{option: raw string}``; rejects unknown keys."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(p, encoding="utf-8")
    except configparser.Error as exc:
        raise UsageError(f"config file {path} is malformed: {exc}") from None
    if not parser.sections():
        raise UsageError(f"config file {path} is empty")
    out, problems = {}, []
    for section in parser.sections():
        for key, value in parser.items(section):
            name = key.replace("-", "_")
            spec = OPTIONS.get(name)
            if spec is None:
                problems.append(f"[{section}] {key}: unknown option")
            elif spec[0] != section:
                problems.append(f"[{section}] {key}: belongs in section [{spec[0]}]")
            else:
                out[name] = value
    if problems:
        raise UsageError("invalid config:\n  " + "\n  ".join(problems))
    return out


def resolve(args):
    """Merge defaults, config file and flags (flags win) into typed values."""
    raw = read_config(args.config) if args.config else {}
    for name in OPTIONS:
        value = getattr(args, name, None)
        if value is not None:
            raw[name] = value
    resolved = {}
    for name, (_, kind, default) in OPTIONS.items():
        resolved[name] = _convert(name, kind, raw[name]) if name in raw else default
    if resolved["format"] not in ("json", "csv"):
        raise UsageError(f"format: expected json or csv, got {resolved['format']!r}")
    if resolved["T_policy"] not in ("formula", "fixed"):
        raise UsageError(f"T_policy: expected formula or fixed, got {resolved['T_policy']!r}")
    return resolved


def _require(params, *names):
    missing = [n for n in names if params[n] is None]
    if missing:
        raise UsageError("missing required parameter(s): " + ", ".join(missing))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return format_exponent(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def canonical_json(obj):
    """Deterministic serialization used for report bodies."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False)


# -- data ----------------------------------------------------------------------


def make_data(params, grid):
    """Initial data and, when known, the exact solution ``(t, x) -> u``."""
    A, profile = params["amplitude"], params["profile"]
    if profile == "sech":
        phi = SpatialField.from_function(grid, lambda x: A / np.cosh(x))
        exact = None
        if abs(A - math.sqrt(2)) < 1e-15:
            exact = lambda t, x: np.sqrt(2) / np.cosh(x) * np.exp(1j * t)  # noqa: E731
        return phi, exact
    if profile == "plane-wave":
        k = grid.dxi * params["wavenumber"]
        phi = grid.mode(params["wavenumber"], A)
        return phi, lambda t, x: A * np.exp(1j * (k * x - k * k * t + A * A * t))
    if profile == "gaussian":
        return SpatialField.from_function(grid, lambda x: A * np.exp(-x * x)), None
    raise UsageError(f"profile: expected sech, plane-wave or gaussian, got {profile!r}")


def _grid(params, prefix=""):
    try:
        return Grid(params[prefix + "grid_n"], params[prefix + "length"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _solver_config(params, grid):
    try:
        return SolverConfig(
            p=float(params["p"]), s=float(params["s"]), grid=grid, tol=params["tol"],
            max_iter=params["max_iter"], time_nodes_per_interval=params["time_nodes"],
            T_max=params["T_max"], T_policy=params["T_policy"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _sample_spec(params):
    try:
        return SampleSpec(seed=params["seed"], count=params["count"],
                          band_limit=params["band_limit"], spectral_decay=params["decay"],
                          grid=_grid(params, "sample_"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- commands ----------------------------------------------------------------------


def cmd_exponents(params):
    _require(params, "p", "s")
    t = main_exponents(params["p"], params["s"])
    reports = validate_main_tuple(t)
    body = {
        "tuple": t.as_dict(),
        "validation": {k: v.as_dict() for k, v in reports.items()},
        "overall": all(v.overall for v in reports.values()),
    }
    rows = [(k, v) for k, v in t.as_dict().items()]
    rows += [(f"validation.{k}", v.overall) for k, v in reports.items()]
    return body, {"values": rows}, {}


def cmd_solve(params):
    _require(params, "p", "s")
    main_exponents(params["p"], params["s"])
    grid = _grid(params)
    cfg = _solver_config(params, grid)
    phi, exact = make_data(params, grid)
    sol = picard_solve(phi, cfg)
    if params["intervals"] > 1:
        sol = continue_solution(sol, phi, params["intervals"], cfg)
    u = sol.field
    body = {
        "trace": sol.trace.as_dict(),
        "segments": [tr.as_dict() for tr in sol.segments[1:]],
        "junction_jumps": sol.junction_jumps,
        "residual": sol.residual,
        "T": sol.T,
        "data_norm": sobolev_norm(phi, float(params["s"]), float(params["p"])),
        "max_ratio": max(
            [r for tr in (sol.segments or [sol.trace]) for r in tr.ratios] or [0.0]
        ),
    }
    if exact is not None:
        ref = exact(u.mesh.nodes[:, None], grid.x[None, :])
        body["exact_sup_error"] = float(np.max(np.abs(u.values - ref)))
    tables = {}
    arrays = {"t": u.mesh.nodes, "x": grid.x, "u": u.values}
    if params["format"] == "csv":
        tt, xx = np.meshgrid(u.mesh.nodes, grid.x, indexing="ij")
        tables["snapshots"] = zip(tt.ravel(), xx.ravel(), u.values.real.ravel(), u.values.imag.ravel())
        arrays = {}
    return body, tables, arrays


def _report_rows(reports):
    summary, ratios = [], []
    for rep in reports:
        summary.append((rep.name, rep.in_hypothesis, rep.max_ratio, rep.median_ratio,
                        rep.empirical_constant, rep.refinement_drift))
        ratios.extend((rep.name, i, r) for i, r in enumerate(rep.ratios))
    return {"summary": summary, "ratios": ratios}


def cmd_verify(params, kind):
    if kind == "uniqueness":
        return cmd_uniqueness(params)
    spec = _sample_spec(params)
    common = dict(refine=params["refine"], workers=params["workers"])
    window, nodes = params["window"], params["sample_time_nodes"]
    p, s = params["p"], params["s"]
    if kind == "decay":
        _require(params, "p", "s", "q", "r")
        reports = [check_decay_embedding(spec, p, s, params["q"], params["r"], window=window,
                                         time_nodes=nodes, **common)]
    elif kind in ("strichartz", "duhamel"):
        _require(params, "p", "s")
        t = main_exponents(p, s)
        if kind == "duhamel":
            reports = [check_duhamel_weighted(spec, t, window=window, time_nodes=nodes, **common)]
        else:
            q = params["q"] if params["q"] is not None else t.q
            r = params["r"] if params["r"] is not None else t.r
            reports = [
                check_homogeneous_strichartz(spec, p, q, r, window=window,
                                             time_nodes=2 * nodes - 1, **common),
                check_inhomogeneous_strichartz(spec, t, window=window, time_nodes=nodes, **common),
            ]
    elif kind == "fefferman-stein":
        _require(params, "p", "q", "r")
        reports = [check_fefferman_stein(spec, p, params["q"], params["r"], window=window,
                                         time_nodes=2 * nodes - 1, **common)]
    elif kind == "trilinear":
        _require(params, "p", "s")
        reports = [check_trilinear(spec, p, s, params["T_list"], **common)]
    elif kind == "leibniz":
        _require(params, "s", "r", "rho")
        reports = [check_fractional_leibniz(spec, s, params["r"], params["rho"], **common)]
    else:
        raise UsageError(f"unknown verify kind {kind!r}")
    body = {"reports": [r.as_dict() for r in reports]}
    return body, _report_rows(reports), {}


def cmd_uniqueness(params):
    _require(params, "p", "s")
    grid = _grid(params)
    cfg = _solver_config(params, grid)
    phi, exact = make_data(params, grid)
    rep = uniqueness_experiment(phi, params["p"], params["s"], params["T_max"], cfg=cfg,
                                exact=exact, constant_seed=params["seed"])
    rows = [("case", rep.case), ("T", rep.T), ("eta", rep.eta), ("constant", rep.constant),
            ("T0", rep.T0)]
    for pair, d in rep.distances.items():
        rows += [(f"distance.{pair}.{k}", v) for k, v in d.items()]
    return rep.as_dict(), {"values": rows}, {}


# -- output -------------------------------------------------------------------------


def _write_outputs(out, stem, params, body, tables, arrays):
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "header": {
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "version": __version__,
        },
        "body": body,
    }
    written = []
    path = out / f"{stem}.json"
    path.write_text(canonical_json(report) + "\n", encoding="utf-8")
    written.append(path)
    if params["format"] == "csv":
        for table, rows in tables.items():
            path = out / f"{stem}-{table}.csv"
            with path.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_SCHEMAS[table])
                for row in rows:
                    w.writerow([_csv_cell(v) for v in row])
            written.append(path)
    if arrays:
        path = out / f"{stem}-solution.npz"
        np.savez(path, **arrays)
        written.append(path)
    return written


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--config", help="INI file; flags override its values")
    g.add_argument("--seed", type=int)
    g.add_argument("--grid-n", dest="grid_n", type=int, help="solver grid points")
    g.add_argument("--length", type=float, help="solver domain period")
    g.add_argument("--p", help="integrability exponent, e.g. 7/4")
    g.add_argument("--s", help="regularity, e.g. 0.25 or 1/4")
    g.add_argument("--window", type=float, help="time window of lab checks")
    g.add_argument("--out", help="output directory")
    g.add_argument("--format", choices=("json", "csv"))
    g.add_argument("--workers", type=int)

    sol = argparse.ArgumentParser(add_help=False)
    h = sol.add_argument_group("solver")
    h.add_argument("--T-max", "--T", dest="T_max", type=float, help="final or maximal time")
    h.add_argument("--T-policy", dest="T_policy", choices=("formula", "fixed"))
    h.add_argument("--tol", type=float)
    h.add_argument("--max-iter", dest="max_iter", type=int)
    h.add_argument("--time-nodes", dest="time_nodes", type=int)
    h.add_argument("--intervals", type=int, help="glued continuation intervals")
    h.add_argument("--profile", choices=("sech", "plane-wave", "gaussian"))
    h.add_argument("--amplitude", type=float)
    h.add_argument("--wavenumber", type=int, help="mode index of plane-wave data")

    lab = argparse.ArgumentParser(add_help=False)
    k = lab.add_argument_group("ensemble")
    k.add_argument("--count", type=int)
    k.add_argument("--band-limit", dest="band_limit", type=int)
    k.add_argument("--decay", type=float, help=f"spectral decay, e.g. one of {DECAY_EXPONENTS}")
    k.add_argument("--sample-grid-n", dest="sample_grid_n", type=int)
    k.add_argument("--sample-length", dest="sample_length", type=float)
    k.add_argument("--sample-time-nodes", dest="sample_time_nodes", type=int)
    k.add_argument("--refine", dest="refine", action="store_const", const=True)
    k.add_argument("--no-refine", dest="refine", action="store_const", const=False)
    k.add_argument("--q")
    k.add_argument("--r")
    k.add_argument("--rho")
    k.add_argument("--T-list", dest="T_list", help="comma separated times for trilinear")

    parser = argparse.ArgumentParser(prog="twistnls", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common, sol], help="Picard solve with JSON trace")
    sub.add_parser("exponents", parents=[common], help="exponent tuple and validation")
    v = sub.add_parser("verify", parents=[common, sol, lab], help="estimate lab checks")
    v.add_argument("kind", choices=VERIFY_KINDS)
    sub.add_parser("uniqueness", parents=[common, sol], help="three-solver uniqueness run")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = resolve(args)
        if args.command == "solve":
            result = cmd_solve(params)
            stem = "solve"
        elif args.command == "exponents":
            result = cmd_exponents(params)
            stem = "exponents"
        elif args.command == "verify":
            result = cmd_verify(params, args.kind)
            stem = f"verify-{args.kind}"
        else:
            result = cmd_uniqueness(params)
            stem = "uniqueness"
    except UsageError as exc:
        print(f"twistnls: usage error: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except ValueError as exc:
        # ValidationError included: parameters outside a module's preconditions
        print(f"twistnls: rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except (SolverError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"twistnls: failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    body, tables, arrays = result
    body = {"command": stem, "version": __version__, "config": params, "result": body}
    written = _write_outputs(Path(params["out"]), stem, params, body, tables, arrays)
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
