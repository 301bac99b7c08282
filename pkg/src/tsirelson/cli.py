"""Command-line front end.

Exit codes: 0 success, 1 validation error (bad parameters, bad files, failed
verification), 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from tsirelson import __version__
from tsirelson.bell import chsh_functional, tilted_functional
from tsirelson.errors import SolverError, TsirelsonError
from tsirelson.pef import CertificationConfig, sweep_alpha, sweep_beta
from tsirelson.polytope import (
    PolytopeModel,
    TsirelsonConstraint,
    audit_model,
    double_bound_extremes,
    eight_chsh_polytope,
    single_bound_extremes,
    verify_extremality,
)
from tsirelson.scenarios import TrialDistribution, parse_scenario

OUTPUT_DIR_ENV = "TSIRELSON_OUTPUT_DIR"
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("tsirelson")


class CliError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _resolve(path: str | None, default_name: str) -> Path:
    base = Path(os.environ.get(OUTPUT_DIR_ENV, "."))
    p = Path(path) if path else Path(default_name)
    return p if p.is_absolute() else base / p


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header(args) -> dict:
    config = {k: v for k, v in vars(args).items() if k != "func" and not callable(v)}
    return {"tool": "tsirelson", "version": __version__, "config": config}


def _csv_text(args, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# tool=tsirelson version={__version__}\n")
    buf.write(f"# config={json.dumps(_header(args)['config'], sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _check_alpha(alpha, strict=True):
    if alpha is None:
        raise CliError("--alpha is required for this variant")
    if (strict and not alpha > 1) or alpha < 1:
        raise CliError(f"alpha must be {'> 1' if strict else '>= 1'}, got {alpha}")


def build_model(args) -> PolytopeModel:
    if args.variant == "double":
        _check_alpha(args.alpha)
        return double_bound_extremes(args.alpha)
    if args.variant == "eight-chsh":
        return eight_chsh_polytope(args.bound if args.bound is not None else 2 * math.sqrt(2))
    if args.variant == "single":
        if args.bell == "chsh":
            functional, tb = chsh_functional(), 2 * math.sqrt(2)
        else:
            _check_alpha(args.alpha, strict=False)
            functional, tb = tilted_functional(args.alpha), 2 * math.sqrt(1 + args.alpha**2)
        bound = tb if args.bound is None else args.bound
        return single_bound_extremes(TsirelsonConstraint(functional, bound, tb=tb))
    raise CliError(f"unknown variant {args.variant!r}")


def load_model(path) -> PolytopeModel:
    path = Path(path)
    if not path.exists():
        raise CliError(f"model file {path} does not exist")
    try:
        data = json.loads(path.read_text())
        return PolytopeModel.from_json(data)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CliError(f"cannot parse model file {path}: {exc}") from exc


def model_document(model: PolytopeModel, args) -> dict:
    return {"generator": _header(args), **model.to_json()}


def cmd_polytope_build(args) -> int:
    model = build_model(args)
    out = _resolve(args.output, f"polytope-{args.variant}.json")
    _atomic_write(out, _json_text(model_document(model, args)))
    values = model.constraint_values()
    bounds = np.array([c.bound for c in model.constraints])
    saturating = int(np.sum(np.any(np.abs(values - bounds) <= 1e-12, axis=1))) if values.size else 0
    print(f"{len(model)} extreme points, {len(model.constraints)} constraints, {saturating} saturating points -> {out}")
    return EXIT_OK


def cmd_polytope_verify(args) -> int:
    model = load_model(args.model)
    audit = audit_model(model)
    extremal = verify_extremality(model)
    by_label = {e.label: e for e in extremal.entries}
    points = []
    for a in audit.entries:
        e = by_label[a.label]
        points.append({
            "label": a.label,
            "audit_passed": a.passed,
            "audit_reason": a.reason,
            "extremality_margin": e.margin,
            "extremal": e.passed,
            "passed": a.passed and e.passed,
        })
    passed = all(p["passed"] for p in points)
    report = {"generator": _header(args), "model": str(args.model), "passed": passed, "points": points}
    out = _resolve(args.output, Path(args.model).stem + "-verify.json")
    _atomic_write(out, _json_text(report))
    failed = [p["label"] for p in points if not p["passed"]]
    print(f"{len(points) - len(failed)}/{len(points)} points pass" + (f"; failing: {', '.join(failed)}" if failed else ""))
    return EXIT_OK if passed else EXIT_INVALID


def _beta_grid(args) -> list[float]:
    if args.beta_count < 1 or not 0 < args.beta_min <= args.beta_max:
        raise CliError("beta grid needs 0 < beta-min <= beta-max and beta-count >= 1")
    return [float(b) for b in np.linspace(args.beta_min, args.beta_max, args.beta_count)]


def _config(args) -> CertificationConfig:
    if not 0 < args.epsilon < 1:
        raise CliError(f"--epsilon must lie in (0, 1), got {args.epsilon}")
    try:
        return CertificationConfig(args.epsilon, args.trials)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _trace_rows(report, alpha=None):
    for pt in report.trace:
        row = [pt.beta, pt.expected_log, pt.bits, pt.status]
        yield row if alpha is None else [alpha] + row


def cmd_certify(args) -> int:
    cfg = _config(args)
    grid = _beta_grid(args)
    model = load_model(args.model) if args.model else build_model(args)
    trial = TrialDistribution(parse_scenario(args.scenario))
    report = sweep_beta(model, trial, cfg, grid, jobs=args.jobs)
    prefix = _resolve(args.out_prefix, "certify")
    columns = ["beta", "expected_log_natural", "bits", "solver_status"]
    _atomic_write(prefix.with_name(prefix.name + "-trace.csv"), _csv_text(args, columns, _trace_rows(report)))
    summary = {"generator": _header(args), "points": len(model), **report.to_json()}
    _atomic_write(prefix.with_name(prefix.name + "-summary.json"), _json_text(summary))
    print(f"best beta={_fmt(report.beta)} bits={_fmt(report.bits)} ({len(report.failed)} failed grid points)")
    return EXIT_OK


def _alpha_grid(args) -> list[float]:
    if args.alphas:
        grid = [float(a) for a in args.alphas.split(",") if a.strip()]
    else:
        if args.alpha_step <= 0 or args.alpha_max < args.alpha_min:
            raise CliError("alpha grid needs alpha-step > 0 and alpha-max >= alpha-min")
        count = int(round((args.alpha_max - args.alpha_min) / args.alpha_step)) + 1
        grid = [round(args.alpha_min + i * args.alpha_step, 12) for i in range(count)]
    if not grid or any(a <= 1 for a in grid):
        raise CliError("alpha grid must be nonempty with every alpha > 1")
    return grid


def cmd_sweep_alpha(args) -> int:
    cfg = _config(args)
    rows = sweep_alpha(_alpha_grid(args), args.trial_alpha, cfg, _beta_grid(args), jobs=args.jobs)
    columns = ["alpha", "beta", "expected_log_natural", "bits", "solver_status"]
    table = [[r.alpha, r.report.beta, r.report.expected_log, r.report.bits,
              "optimal" if not r.report.failed else f"{len(r.report.failed)} failed"] for r in rows]
    out = _resolve(args.output, "sweep-alpha.csv")
    _atomic_write(out, _csv_text(args, columns, table))
    best = max(rows, key=lambda r: r.bits)
    print(f"{len(rows)} alphas; best alpha={_fmt(best.alpha)} bits={_fmt(best.bits)} -> {out}")
    return EXIT_OK


def cmd_scenario_dump(args) -> int:
    behavior = parse_scenario(args.scenario)
    out = _resolve(args.output, "scenario.json")
    _atomic_write(out, _json_text({"generator": _header(args), "scenario": args.scenario, **behavior.to_json()}))
    print(f"wrote {args.scenario} -> {out}")
    return EXIT_OK


def _add_model_args(p):
    p.add_argument("--variant", choices=["single", "eight-chsh", "double"], default="double")
    p.add_argument("--alpha", type=float, default=None, help="tilted CHSH parameter")
    p.add_argument("--bell", choices=["chsh", "tilted"], default="chsh", help="functional for --variant single")
    p.add_argument("--bound", type=float, default=None, help="TB* (defaults to the known Tsirelson bound)")


def _add_cert_args(p):
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--trials", "-n", type=int, default=10_000)
    p.add_argument("--beta-min", type=float, default=0.001)
    p.add_argument("--beta-max", type=float, default=0.100)
    p.add_argument("--beta-count", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsirelson", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tsirelson {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    poly = sub.add_parser("polytope", help="build or verify polytope models")
    poly_sub = poly.add_subparsers(dest="action", required=True)
    build = poly_sub.add_parser("build", help="construct a Tsirelson polytope")
    _add_model_args(build)
    build.add_argument("-o", "--output")
    build.set_defaults(func=cmd_polytope_build)
    verify = poly_sub.add_parser("verify", help="audit and LP-verify a polytope file")
    verify.add_argument("model")
    verify.add_argument("-o", "--output")
    verify.set_defaults(func=cmd_polytope_verify)

    cert = sub.add_parser("certify", help="beta sweep of PEF optimization")
    cert.add_argument("--model", help="polytope JSON; otherwise built from --variant/--alpha/...")
    _add_model_args(cert)
    cert.add_argument("--scenario", default="tilted:alpha=2")
    _add_cert_args(cert)
    cert.add_argument("--out-prefix")
    cert.set_defaults(func=cmd_certify)

    sweep = sub.add_parser("sweep-alpha", help="best bits per alpha for the two-bound polytope")
    sweep.add_argument("--alpha-min", type=float, default=1.90)
    sweep.add_argument("--alpha-max", type=float, default=2.10)
    sweep.add_argument("--alpha-step", type=float, default=0.01)
    sweep.add_argument("--alphas", help="comma-separated alpha list (overrides the range)")
    sweep.add_argument("--trial-alpha", type=float, default=2.0)
    _add_cert_args(sweep)
    sweep.add_argument("-o", "--output")
    sweep.set_defaults(func=cmd_sweep_alpha)

    scen = sub.add_parser("scenario", help="reference behaviors")
    scen_sub = scen.add_subparsers(dest="action", required=True)
    dump = scen_sub.add_parser("dump", help="write a named behavior as JSON")
    dump.add_argument("--scenario", default="tilted:alpha=2")
    dump.add_argument("-o", "--output")
    dump.set_defaults(func=cmd_scenario_dump)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CliError, TsirelsonError, ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
