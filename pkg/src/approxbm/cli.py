"""Command line entry point.

Exit codes: 0 when everything checked is satisfied or valid, 1 when a
violation is found, 2 when the input or the invocation is unusable.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import bm
from .discretize import ModelSpace, discretize_grid
from .harness import CSV_COLUMNS, ExperimentSpec, run_discretization_sweep, run_stability_replay
from .space import BMQuery, FiniteMetricMeasureSpace, StructuralError, validate_space

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class InputError(Exception):
    pass


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as err:
        raise InputError(f"{path}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise InputError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from None


def _load(path, parse):
    obj = _load_json(path)
    try:
        return parse(obj)
    except (StructuralError, ValueError, KeyError, TypeError) as err:
        raise InputError(f"{path}: {err}") from None


def _indices(values):
    out = []
    for v in values:
        out.extend(int(x) for x in str(v).split(",") if x.strip())
    return out


def _emit(args, payload, rows=None):
    if args.csv:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows or [])
        text = buf.getvalue()
    else:
        text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report_row(rep):
    return {"resolution": "", "h": rep.query.h, "eps": "", "s": rep.query.s, "N": rep.query.N,
            "lhs": rep.lhs, "rhs": rep.rhs, "deficit": rep.deficit, "status": rep.status,
            "K": ",".join(map(str, rep.K.to_json())), "L": ",".join(map(str, rep.L.to_json()))}


def cmd_validate(args):
    space = _load(args.space, FiniteMetricMeasureSpace.from_json)
    report = validate_space(space, args.tol_tri)
    _emit(args, report.to_json())
    for v in report.violations:
        print(f"{args.space}: {v.kind}: {v.detail}", file=sys.stderr)
    return EXIT_OK if report.valid else EXIT_USAGE


def cmd_bm_check(args):
    space = _load(args.space, FiniteMetricMeasureSpace.from_json)
    try:
        K, L = space.subset(_indices(args.K)), space.subset(_indices(args.L))
        if args.mult:
            rep = bm.bm_mult_check(space, K, L, args.s, args.h, args.tol)
        else:
            rep = bm.bm_check(space, K, L, BMQuery(args.N, args.s, args.h), args.tol)
    except ValueError as err:
        raise InputError(str(err)) from None
    _emit(args, rep.to_json(), [_report_row(rep)])
    return EXIT_VIOLATION if rep.status == bm.VIOLATED else EXIT_OK


def cmd_bm_search(args):
    space = _load(args.space, FiniteMetricMeasureSpace.from_json)
    try:
        cfg = bm.SearchConfig(seed=args.seed, iterations=args.iters, top_k=args.top)
        reports = bm.bm_search_violations(space, args.N, args.h, cfg, args.tol)
    except ValueError as err:
        raise InputError(str(err)) from None
    _emit(args, {"N": args.N, "h": args.h, "seed": args.seed, "iterations": args.iters,
                 "reports": [r.to_json() for r in reports]},
          [_report_row(r) for r in reports])
    return EXIT_VIOLATION if any(r.status == bm.VIOLATED for r in reports) else EXIT_OK


def cmd_discretize(args):
    model = _load(args.model, ModelSpace.from_json)
    try:
        space, h = discretize_grid(model, args.cells if len(args.cells) > 1 else args.cells[0])
    except ValueError as err:
        raise InputError(str(err)) from None
    payload = space.to_json() | {"h": h}
    args.csv = False
    _emit(args, payload)
    return EXIT_OK


def _spec(args):
    spec = _load(args.experiment, ExperimentSpec.from_json)
    if args.seed is not None:
        spec.seed = args.seed
    if args.tol is not None:
        spec.tol = args.tol
    return spec


def cmd_sweep(args):
    spec = _spec(args)
    result = run_discretization_sweep(spec, threads=args.threads)
    _emit(args, result.to_json(), result.rows + result.exhaustive)
    return EXIT_OK if result.ok else EXIT_VIOLATION


def cmd_stability(args):
    spec = _spec(args)
    report = run_stability_replay(spec)
    _emit(args, report.to_json(), report.rows())
    return EXIT_OK if report.ok else EXIT_VIOLATION


def build_parser():
    parser = argparse.ArgumentParser(prog="approxbm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--csv", action="store_true", help="emit flat CSV rows")
        return p

    p = add("validate", cmd_validate, "check the metric-measure axioms of a space file")
    p.add_argument("space")
    p.add_argument("--tol-tri", type=float, default=None)

    p = add("bm-check", cmd_bm_check, "evaluate BM(N,h) on one subset pair")
    p.add_argument("space")
    p.add_argument("--K", nargs="+", required=True, help="indices, space or comma separated")
    p.add_argument("--L", nargs="+", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--N", type=float, default=1.0)
    p.add_argument("--mult", action="store_true", help="multiplicative form")
    p.add_argument("--tol", type=float, default=bm.TOL_REPORT)

    p = add("bm-search", cmd_bm_search, "seeded search for BM(N,h) violations")
    p.add_argument("space")
    p.add_argument("--N", type=float, default=1.0)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--top", type=int, default=20)
    p.add_argument("--tol", type=float, default=bm.TOL_REPORT)

    p = add("discretize", cmd_discretize, "grid discretization of a model space")
    p.add_argument("model")
    p.add_argument("--cells", type=int, nargs="+", required=True)

    for name, func, help in (("sweep", cmd_sweep, "discretization theorem sweep"),
                             ("stability", cmd_stability, "stability proof replay")):
        p = add(name, func, help)
        p.add_argument("experiment")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        if name == "sweep":
            p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    N = getattr(args, "N", None)
    if N is not None and N != int(N):
        print(f"note: fractional dimension N={N}", file=sys.stderr)
    try:
        return args.func(args)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
