"""Command-line interface.

    nilhodge check-structure --preset omega_a
    nilhodge classify --preset omega_tf --grid 8
    nilhodge betti --preset torus
    nilhodge harmonic11 --preset omega_0 --grid 8 --json out.json
    nilhodge sweep a 0,1/4,1/2,3/4 --preset omega_a --csv sweep.csv
    nilhodge convergence --preset omega_tf --grids 8,16 --csv conv.csv

Exit codes: 0 ok, 1 other error, 2 invalid algebra, 3 invalid metric,
4 indeterminate spectrum.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

import numpy as np

from .algebra import InvalidAlgebraError, is_integrable, structure_equations, verify_d2_identities
from .cohomology import betti_report
from .config import ConfigError, RunConfig, from_preset, load_config, parse_param
from .expr import ExpressionError, check_quotient_periodicity, parse_expression
from .grid import GridError, TwistedGrid, read_grid_functions
from .hermitian import classify_metric
from .pointwise import MetricError
from .spectral import SpectralError, analyse, assemble_harmonic_operator, residual, subspace_angles

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_OTHER", "EXIT_ALGEBRA", "EXIT_METRIC", "EXIT_INDETERMINATE"]

SCHEMA_VERSION = 1
EXIT_OK, EXIT_OTHER, EXIT_ALGEBRA, EXIT_METRIC, EXIT_INDETERMINATE = 0, 1, 2, 3, 4

log = logging.getLogger("nilhodge")


# helpers ---------------------------------------------------------------------------


def _assertion(name, value, tolerance, outcome):
    return {"name": name, "value": value, "tolerance": tolerance, "outcome": "pass" if outcome else "fail"}


def _config(args) -> RunConfig:
    params = dict(parse_param(p) for p in args.param or [])
    if args.config and args.preset:
        raise ConfigError("use either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config, params)
    else:
        cfg = from_preset(args.preset or "omega_a", params)
    return cfg.with_solver(N=getattr(args, "grid", None), k=getattr(args, "num_sv", None), seed=getattr(args, "seed", None))


def _grid(cfg: RunConfig, algebra, N=None) -> TwistedGrid:
    return TwistedGrid.for_algebra(algebra, N or cfg.solver["N"], cfg.solver["N4"])


def _periodicity_warnings(metric, algebra) -> list[str]:
    """Quotient well-definedness of every non-constant metric entry."""
    out = []
    shear = int(algebra.constants.get((3, 1, 2), 0))
    for r, row in enumerate(metric.h):
        for c, x in enumerate(row):
            if hasattr(x, "evaluate") and x.depends_on_coordinates(metric.params):
                mis = check_quotient_periodicity(x, params=metric.params, shear=shear)
                if mis > 1e-9:
                    msg = f"metric entry h{r + 1}{c + 1} = {x} is not well defined on the quotient (mismatch {mis:.3e})"
                    log.warning(msg)
                    out.append(msg)
    return out


def _fmt(v) -> str:
    return str(v)


def _emit(args, report: dict, lines: list[str]):
    report = {"schema_version": SCHEMA_VERSION, **report}
    text = json.dumps(report, indent=2, sort_keys=True, default=_fmt) + "\n"
    if args.json == "-":
        sys.stdout.write(text)
    else:
        for line in lines:
            print(line)
        if args.json:
            with open(args.json, "w") as fh:
                fh.write(text)


# commands ---------------------------------------------------------------------------


def cmd_check_structure(args) -> int:
    cfg = _config(args)
    algebra = cfg.algebra()
    # no validation up front: the identity report names what fails
    frame = cfg.acs_frame(algebra)
    table = structure_equations(algebra, frame)
    identities = verify_d2_identities(algebra, frame)
    integrable = is_integrable(algebra, frame)
    asserts = [_assertion(f"identity: {k} = 0", v, "exact", v) for k, v in identities.items()]
    report = {
        "command": "check-structure",
        "config": cfg.to_dict(),
        "structure_equations": {k: {m: str(c) for m, c in v.items()} for k, v in table.items()},
        "identities": identities,
        "integrable": integrable,
        "assertions": asserts,
    }
    lines = [f"frame {frame.name} on {algebra.name}"]
    for k, v in table.items():
        terms = " + ".join(f"({c}) Phi^{m}" for m, c in v.items()) or "0"
        lines.append(f"  {k} = {terms}")
    lines += [f"  {k} = 0: {'ok' if v else 'FAILS'}" for k, v in identities.items()]
    lines.append(f"integrable: {str(integrable).lower()}")
    _emit(args, report, lines)
    failed = [k for k, v in identities.items() if not v]
    if failed or not algebra.is_valid():
        print(f"invalid algebra: failing identities: {', '.join(failed) or 'none'}", file=sys.stderr)
        return EXIT_ALGEBRA
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _config(args)
    algebra, frame, metric = cfg.build()
    algebra.validate()
    warnings = _periodicity_warnings(metric, algebra)
    grid = None if metric.is_constant() else _grid(cfg, algebra)
    if grid is not None:
        metric.sample(grid)
    cls = classify_metric(algebra, frame, metric, grid=grid)
    out = cls.to_dict()
    if cls.theta.exact:
        out["lee_form"] = str(cls.theta.theta)
        out["lee_form_real"] = cls.theta_real
    else:
        out["lee_form_sampled_max"] = cls.theta.theta.max_norm()
        out["grid"] = grid.N
    asserts = []
    if cls.pairings:
        asserts.append(_assertion("max cohomology pairing of theta", max(cls.pairings), cls.tolerance, True))
    report = {"command": "classify", "config": cfg.to_dict(), "classification": out, "warnings": warnings, "assertions": asserts}
    lines = [f"metric {metric.name}: {cls.label}"]
    if cls.theta.exact:
        lines.append(f"  theta = {cls.theta.theta}  (real coframe: {', '.join(cls.theta_real)})")
    lines.append(f"  |d theta| = {cls.dtheta_norm:.3e}")
    _emit(args, report, lines)
    return EXIT_OK


def cmd_betti(args) -> int:
    cfg = _config(args)
    algebra = cfg.algebra()
    rep = betti_report(algebra)
    report = {"command": "betti", "config": cfg.to_dict(), "betti": rep.to_dict()}
    lines = [
        f"{algebra.name}: b = {rep.betti}, b+ = {rep.b_plus}, b- = {rep.b_minus}, euler = {rep.euler}",
        "  anti-self-dual: " + ", ".join(str(f) for f in rep.anti_self_dual),
        "  self-dual: " + ", ".join(str(f) for f in rep.self_dual),
    ]
    _emit(args, report, lines)
    return EXIT_OK


def _spectral_run(cfg: RunConfig, N=None, metric=None):
    algebra, frame, metric0 = cfg.build()
    algebra.validate()
    metric = metric or metric0
    grid = _grid(cfg, algebra, N)
    D = assemble_harmonic_operator(algebra, frame, metric, grid)
    s = cfg.solver
    rep = analyse(
        D,
        k=s["k"],
        seed=s["seed"],
        gap_factor=s["gap_factor"],
        cap_rel=s["cap"],
        method=s["method"],
        maxiter=s["maxiter"],
        tol=s["tol"],
        metric_id=metric.name,
    )
    return D, rep


def _load_candidates(path, D, cfg: RunConfig) -> list:
    """Binary grid-function files (groups of 4 components) or text lines 'A; B; L; M'."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == b"NILGRID1":
        shape, comps = read_grid_functions(path)
        if shape != D.grid.shape or comps.shape[0] % 4:
            raise GridError(f"{path}: expected 4k components on grid {D.grid.shape}, got {comps.shape[0]} on {shape}")
        return [(f"candidate {n + 1}", comps[4 * n : 4 * n + 4]) for n in range(comps.shape[0] // 4)]
    out = []
    params = cfg.resolved_params()
    numeric = {k: float(v) for k, v in params.items() if not isinstance(v, str)}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [cfg._expand(p) for p in line.split(";")]
            if len(parts) != 4:
                raise ConfigError(f"{path}: candidate line needs four ';'-separated coefficients: {line!r}")
            arr = np.array([D.grid.sample(parse_expression(p), numeric) for p in parts])
            out.append((line, arr))
    return out


def cmd_harmonic11(args) -> int:
    cfg = _config(args)
    algebra, frame, metric = cfg.build()
    warnings = _periodicity_warnings(metric, algebra)
    D, rep = _spectral_run(cfg, metric=metric)
    timing = not args.no_timing
    spec = rep.to_dict(timing=timing)
    asserts = []
    if rep.dimension is not None:
        asserts.append(_assertion("gap ratio", rep.gap_ratio, cfg.solver["gap_factor"], rep.gap_ratio is None or rep.gap_ratio >= cfg.solver["gap_factor"]))
        tol = args.residual_tol
        for n, r in enumerate(rep.residuals):
            asserts.append(_assertion(f"kernel vector {n + 1} residual", r, tol, r <= tol))
    report = {"command": "harmonic11", "config": cfg.to_dict(), "spectral": spec, "warnings": warnings}
    lines = [
        f"metric {metric.name}, N={rep.N}: dimension {rep.dimension if rep.dimension is not None else '?'} ({rep.status})",
        "  smallest singular values: " + " ".join(f"{v:.3e}" for v in rep.singular_values),
        f"  {rep.diagnostic}",
    ]
    if args.verify_basis:
        rows = []
        for label, arr in _load_candidates(args.verify_basis, D, cfg):
            r = residual(D, arr)
            rows.append({"candidate": label, "residual": r})
            asserts.append(_assertion(f"candidate residual: {label}", r, args.residual_tol, r <= args.residual_tol))
            lines.append(f"  candidate {label}: residual {r:.3e}")
        report["verify_basis"] = rows
    if args.compare_conformal:
        factor = parse_expression(cfg._expand(args.compare_conformal))
        scaled = metric.scaled(factor)
        D2, rep2 = _spectral_run(cfg, metric=scaled)
        diff = float(np.max(np.abs(D.star11 - D2.star11)) / np.max(np.abs(D.star11)))
        block = {"factor": str(factor), "coefficient_difference": diff, "spectral": rep2.to_dict(timing=timing)}
        asserts.append(_assertion("conformal operator coefficient difference", diff, 1e-13, diff <= 1e-13))
        if rep.dimension and rep2.dimension == rep.dimension:
            ang = subspace_angles(D, rep.basis, rep2.basis)
            block["subspace_angles"] = [float(a) for a in ang]
            asserts.append(_assertion("conformal kernel angles", float(ang.max()), 1e-8, ang.max() <= 1e-8))
            lines.append(f"  conformal rescaling by {factor}: max angle {ang.max():.3e}, coefficient difference {diff:.3e}")
        else:
            block["subspace_angles"] = None
            lines.append(f"  conformal rescaling by {factor}: dimension {rep2.dimension} vs {rep.dimension}")
        report["conformal"] = block
    report["assertions"] = asserts
    _emit(args, report, lines)
    if rep.status != "ok":
        return EXIT_INDETERMINATE
    return EXIT_OK


def _rows_to_csv(args, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r.get(h, "") for h in header])
    text = buf.getvalue()
    if args.csv and args.csv != "-":
        with open(args.csv, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _row(rep, k, timing, extra):
    row = {"schema_version": SCHEMA_VERSION, **extra}
    row.update(status=rep.status, dimension="" if rep.dimension is None else rep.dimension)
    row["gap_ratio"] = "" if rep.gap_ratio is None else repr(float(rep.gap_ratio))
    for j in range(k):
        row[f"sv_{j + 1}"] = repr(float(rep.singular_values[j])) if j < len(rep.singular_values) else ""
    if timing:
        row["wall_ms"] = f"{rep.wall_ms:.1f}"
    return row


def cmd_sweep(args) -> int:
    cfg = _config(args)
    k = cfg.solver["k"]
    timing = not args.no_timing
    rows = []
    for value in [v.strip() for v in args.values.split(",") if v.strip()]:
        extra = {"param": args.name, "value": value}
        try:
            _, rep = _spectral_run(cfg.with_params({args.name: value}))
            rows.append(_row(rep, k, timing, extra))
        except Exception as exc:  # recorded per row, the sweep continues
            rows.append({"schema_version": SCHEMA_VERSION, **extra, "status": "error", "error": str(exc)})
    header = ["schema_version", "param", "value", "status", "dimension", "gap_ratio"]
    header += [f"sv_{j + 1}" for j in range(k)] + (["wall_ms"] if timing else []) + ["error"]
    _rows_to_csv(args, header, rows)
    return EXIT_OK


def cmd_convergence(args) -> int:
    cfg = _config(args)
    k = cfg.solver["k"]
    timing = not args.no_timing
    rows, prev = [], None
    for N in [int(v) for v in args.grids.split(",") if v.strip()]:
        extra = {"N": N}
        try:
            _, rep = _spectral_run(cfg, N=N)
            row = _row(rep, k, timing, extra)
            if prev is not None:
                for j in range(min(k, len(prev), len(rep.singular_values))):
                    cur = rep.singular_values[j]
                    row[f"ratio_{j + 1}"] = repr(float(prev[j] / cur)) if cur > 0 else ""
            prev = rep.singular_values
            rows.append(row)
        except Exception as exc:
            rows.append({"schema_version": SCHEMA_VERSION, **extra, "status": "error", "error": str(exc)})
    header = ["schema_version", "N", "status", "dimension", "gap_ratio"]
    header += [f"sv_{j + 1}" for j in range(k)] + [f"ratio_{j + 1}" for j in range(k)]
    header += (["wall_ms"] if timing else []) + ["error"]
    _rows_to_csv(args, header, rows)
    return EXIT_OK


# parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI run configuration")
    common.add_argument("--preset", metavar="NAME", help="omega_a, omega_tilde_a, omega_0, omega_tf or torus")
    common.add_argument("--param", metavar="K=V", action="append", help="parameter binding (repeatable)")
    common.add_argument("--json", metavar="PATH", help="write the JSON report ('-' for stdout)")
    common.add_argument("-v", "--verbose", action="store_true", help="log preset expansion")

    spectral = argparse.ArgumentParser(add_help=False)
    spectral.add_argument("--grid", type=int, metavar="N", help="lattice points per axis")
    spectral.add_argument("--num-sv", type=int, metavar="K", help="number of singular values")
    spectral.add_argument("--seed", type=int, help="seed for start vectors")
    spectral.add_argument("--no-timing", action="store_true", help="omit wall-clock fields (byte-stable output)")
    spectral.add_argument("--csv", metavar="PATH", help="CSV output ('-' for stdout)")

    p = argparse.ArgumentParser(prog="nilhodge", description="Harmonic forms on almost-Hermitian nilmanifolds")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("check-structure", parents=[common], help="structure equations and d^2 identities")
    s.set_defaults(func=cmd_check_structure)
    s = sub.add_parser("classify", parents=[common, spectral], help="Lee form and metric class")
    s.set_defaults(func=cmd_classify)
    s = sub.add_parser("betti", parents=[common], help="Betti numbers, b+ and b-")
    s.set_defaults(func=cmd_betti)
    s = sub.add_parser("harmonic11", parents=[common, spectral], help="dimension of harmonic (1,1)-forms")
    s.add_argument("--verify-basis", metavar="PATH", help="candidate forms to test against the operator")
    s.add_argument("--compare-conformal", metavar="EXPR", help="rerun with the metric scaled by EXPR")
    s.add_argument("--residual-tol", type=float, default=1e-8, help="tolerance for residual assertions")
    s.set_defaults(func=cmd_harmonic11)
    s = sub.add_parser("sweep", parents=[common, spectral], help="kernel dimension over parameter values")
    s.add_argument("name", help="parameter name")
    s.add_argument("values", help="comma-separated values")
    s.set_defaults(func=cmd_sweep)
    s = sub.add_parser("convergence", parents=[common, spectral], help="singular values over grid sizes")
    s.add_argument("--grids", default="8,16", help="comma-separated N values")
    s.set_defaults(func=cmd_convergence)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InvalidAlgebraError as exc:
        print(f"invalid algebra: {exc}", file=sys.stderr)
        return EXIT_ALGEBRA
    except MetricError as exc:
        print(f"invalid metric: {exc}", file=sys.stderr)
        return EXIT_METRIC
    except (ConfigError, ExpressionError, GridError, SpectralError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
