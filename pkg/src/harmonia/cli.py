"""``harmonia`` command-line entry point.

Exit codes: 0 success, 1 a check failed (or ``h(k)`` is infinite), 2 usage or
input error.  Primary output goes to stdout or ``--out``; floats are written
with 17 significant digits so identical argv and seed give identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from . import __version__
from .distributions import PmfError, moments, pmf_from_json
from .gclass import curvature, curvature_limit, membership
from .montecarlo import default_threads
from .products import estimate_rho, theorem6_crosscheck
from .recursion import InfiniteRegime, lower_bound_iter, prop71_bound, solve_h
from .simulate import (ModelError, estimate_H, estimate_h, homogeneous, model_from_json,
                       model_to_json, reduce)
from .verify import SUITES, emit, verify_suite

__all__ = ["main", "run", "build_parser"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _num(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _csv(header, rows, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else _num(v) for v in r])
    return buf.getvalue()


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from exc


def _load_json_arg(text: str):
    if os.path.exists(text):
        with open(text, encoding="utf-8") as fh:
            return json.load(fh)
    return json.loads(text)


def _pmf(args):
    if args.pmf is None:
        raise UsageError("--pmf is required")
    try:
        return pmf_from_json(_load_json_arg(args.pmf))
    except json.JSONDecodeError as exc:
        raise UsageError(f"--pmf is not valid JSON: {exc}") from exc


def _model(args):
    if getattr(args, "model", None):
        try:
            return model_from_json(_load_json_arg(args.model))
        except json.JSONDecodeError as exc:
            raise UsageError(f"--model is not valid JSON: {exc}") from exc
    if args.pmf is None or args.k0 is None:
        raise UsageError("give --model, or --pmf with --k0")
    return homogeneous(_pmf(args), args.k0, args.rate)


def _threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be positive")
        return args.threads
    try:
        return default_threads()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# -- subcommands ----------------------------------------------------------------

def cmd_moments(args):
    ms = moments(_pmf(args))
    alpha = "none" if ms.alpha is None else _num(ms.alpha)
    line = (f"mean={_num(ms.mean)} m1={_num(ms.m1)} m2={_num(ms.m2)} m0={_num(ms.m0)} "
            f"alpha={alpha}\n")
    return line, EXIT_OK


def cmd_gclass(args):
    p = _pmf(args)
    rows = []
    for c in _floats(args.c):
        r = membership(p, c, args.grid)
        rows.append((r.c, r.in_class, r.min_margin, r.argmin_s))
    return _csv(("c", "in_class", "min_margin", "argmin_s"), rows), EXIT_OK


def cmd_curvature(args):
    p = _pmf(args)
    if args.u_grid:
        table = curvature_limit(p, _floats(args.u_grid), args.tol, args.grid)
        rows = [(u, b.lo, b.hi, b.tol, b.iterations) for u, b in table.items()]
        ok = all(b.converged for b in table.values())
        return _csv(("u", "lo", "hi", "tol", "iterations"), rows), EXIT_OK if ok else EXIT_FAIL
    b = curvature(p, args.tol, args.grid)
    out = _csv(("lo", "hi", "tol", "iterations"), [(b.lo, b.hi, b.tol, b.iterations)])
    return out, EXIT_OK if b.converged else EXIT_FAIL


def cmd_solve_h(args):
    p = _pmf(args)
    if args.k is not None:
        k_min = k_max = args.k
    else:
        k_min, k_max = args.k_min, args.k_max
        if k_max is None:
            raise UsageError("give --k, or --k-max (with optional --k-min)")
    t = solve_h(p, k_min, k_max, args.k_tail, args.sweeps)
    meta = [f"m1={_num(t.m1)}", f"m2={_num(t.m2)}", f"K_tail={t.k_tail}", f"sweeps={t.sweeps}",
            f"pmf_digest={t.pmf_digest}"]
    rows = [(int(k), lo, hi, hi - lo) for k, lo, hi in zip(t.ks, t.lo, t.hi)]
    return _csv(("k", "lo", "hi", "width"), rows, meta), EXIT_OK


def cmd_bounds(args):
    p = _pmf(args)
    ms = moments(p)
    rows = []
    for k in _ints(args.k):
        bound, used, opt = prop71_bound(p, k, args.ell)
        upper = 1.0 / (k - ms.m2) if k > ms.m2 else math.inf
        lower = 1.0 / (k - ms.m1)
        iterate = lower_bound_iter(ms.m1, float(k), args.iterations)
        rows.append((k, lower, iterate, upper, bound, used, opt))
    header = ("k", "lower", "lower_iterate", "upper", "prop71", "ell", "ell_optimal")
    return _csv(header, rows), EXIT_OK


def cmd_simulate(args):
    m = _model(args)
    ests = estimate_h(m, _floats(args.t_grid), args.reps, args.seed, args.shift_b,
                      threads=_threads(args))
    rows = [(e.t_or_n, e.value, e.stderr, e.replicates, e.censored) for e in ests]
    code = EXIT_FAIL if any(e.censored for e in ests) else EXIT_OK
    return _csv(("t", "estimate", "stderr", "reps", "censored"), rows), code


def cmd_simulate_dt(args):
    p = _pmf(args)
    ests = estimate_H(p, args.k0, _ints(args.n), args.u, args.reps, args.seed,
                      threads=_threads(args))
    rows = [(int(e.t_or_n), e.value, e.stderr, e.replicates, e.censored) for e in ests]
    code = EXIT_FAIL if any(e.censored for e in ests) else EXIT_OK
    return _csv(("n", "estimate", "stderr", "reps", "censored"), rows), code


def cmd_rho(args):
    p = _pmf(args)
    rows = []
    for x in _floats(args.x):
        e = estimate_rho(x, p, args.n, args.reps, args.seed, threads=_threads(args))
        rows.append((e.x, e.n, e.value, e.stderr, e.diverging))
    return _csv(("x", "n", "estimate", "stderr", "diverging"), rows), EXIT_OK


def cmd_crosscheck(args):
    p = _pmf(args)
    r = theorem6_crosscheck(p, args.k, args.n, args.reps, args.seed, threads=_threads(args))
    rows = []
    for form, est, h, se, err, tol in (
            ("unconditioned", r.unconditioned, r.h_unconditioned, r.se_unconditioned,
             r.err_unconditioned, r.tol_unconditioned),
            ("conditioned", r.conditioned, r.h_conditioned, r.se_conditioned,
             r.err_conditioned, r.tol_conditioned)):
        rows.append((form, est.x, h, se, r.h_lo, r.h_hi, err, tol,
                     "pass" if err <= tol else "fail"))
    header = ("form", "x", "h_estimate", "stderr", "h_lo", "h_hi", "error", "tolerance", "status")
    return _csv(header, rows), EXIT_OK if r.passed else EXIT_FAIL


def cmd_reduce(args):
    m = _model(args)
    return json.dumps(model_to_json(reduce(m)), indent=2) + "\n", EXIT_OK


def cmd_verify(args):
    pmf = _pmf(args) if args.pmf is not None else None
    extra = {"k": args.k} if args.k is not None else {}
    report = verify_suite(args.suite, args.seed, pmf, **extra)
    print(f"suite {report.suite}: wall time {report.wall_time:.3f} s", file=sys.stderr)
    return emit(report, args.format).decode(), EXIT_OK if report.passed else EXIT_FAIL


# -- parser ---------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write primary output to this file instead of stdout")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: HARMONIA_THREADS or 1)")

    def pmf_opt(sp, required=False):
        sp.add_argument("--pmf", required=required,
                        help='offspring law as JSON, e.g. \'[[0,0.5],[2,0.5]]\', or a file path')

    def seed_opt(sp):
        sp.add_argument("--seed", type=int, required=True, help="random seed (mandatory)")

    ap = _Parser(prog="harmonia", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"harmonia {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("moments", parents=[common], help="thresholds m1, m2, m0 and alpha")
    pmf_opt(sp, True)
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("gclass", parents=[common], help="membership in the comparison class")
    pmf_opt(sp, True)
    sp.add_argument("--c", required=True, help="comma-separated c values")
    sp.add_argument("--grid", type=int, default=4096)
    sp.set_defaults(func=cmd_gclass)

    sp = sub.add_parser("curvature", parents=[common], help="bisection bracket for the curvature")
    pmf_opt(sp, True)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--grid", type=int, default=4096)
    sp.add_argument("--u-grid", default=None, help="decreasing thinning levels, comma-separated")
    sp.set_defaults(func=cmd_curvature)

    sp = sub.add_parser("solve-h", parents=[common], help="certified brackets for h(k)")
    pmf_opt(sp, True)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--k-min", type=int, default=None)
    sp.add_argument("--k-max", type=int, default=None)
    sp.add_argument("--k-tail", type=int, default=None)
    sp.add_argument("--sweeps", type=int, default=3)
    sp.set_defaults(func=cmd_solve_h)

    sp = sub.add_parser("bounds", parents=[common], help="a priori bounds on h(k)")
    pmf_opt(sp, True)
    sp.add_argument("--k", required=True, help="comma-separated k values")
    sp.add_argument("--ell", type=int, default=None, help="product length (default: optimal)")
    sp.add_argument("--iterations", type=int, default=1, help="lower-bound iterate index")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("simulate", parents=[common], help="continuous-time h_k(t) estimates")
    pmf_opt(sp)
    sp.add_argument("--model", default=None, help="model JSON or file path")
    sp.add_argument("--k0", type=int, default=None)
    sp.add_argument("--rate", type=float, default=1.0)
    sp.add_argument("--t-grid", required=True, help="comma-separated times")
    sp.add_argument("--reps", type=int, required=True)
    sp.add_argument("--shift-b", type=float, default=0.0)
    seed_opt(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("simulate-dt", parents=[common], help="discrete-time H_n estimates")
    pmf_opt(sp, True)
    sp.add_argument("--k0", type=int, required=True)
    sp.add_argument("--n", required=True, help="comma-separated generations")
    sp.add_argument("--u", type=float, default=None, help="thinning level in (0, 1]")
    sp.add_argument("--reps", type=int, required=True)
    seed_opt(sp)
    sp.set_defaults(func=cmd_simulate_dt)

    sp = sub.add_parser("rho", parents=[common], help="random-product estimates E{R_n}/n")
    pmf_opt(sp, True)
    sp.add_argument("--x", required=True, help="comma-separated x values")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--reps", type=int, required=True)
    seed_opt(sp)
    sp.set_defaults(func=cmd_rho)

    sp = sub.add_parser("crosscheck", parents=[common], help="random products against solve-h")
    pmf_opt(sp, True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--reps", type=int, default=10_000)
    seed_opt(sp)
    sp.set_defaults(func=cmd_crosscheck)

    sp = sub.add_parser("reduce", parents=[common], help="canonical reduction of a model")
    pmf_opt(sp)
    sp.add_argument("--model", default=None)
    sp.add_argument("--k0", type=int, default=None)
    sp.add_argument("--rate", type=float, default=1.0)
    sp.set_defaults(func=cmd_reduce)

    sp = sub.add_parser("verify", parents=[common], help="run a verification suite")
    sp.add_argument("--suite", required=True, help=f"one of: {', '.join(SUITES)}")
    pmf_opt(sp)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    seed_opt(sp)
    sp.set_defaults(func=cmd_verify)
    return ap


def run(argv=None) -> int:
    """Execute one command line and return its exit code."""
    ap = build_parser()
    try:
        try:
            args = ap.parse_args(argv)
        except SystemExit as exc:  # --help, --version
            return int(exc.code or 0)
        if args.command == "verify" and args.suite not in SUITES:
            raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
        text, code = args.func(args)
    except UsageError as exc:
        print(f"harmonia: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfiniteRegime as exc:
        print(f"harmonia: k ≤ m1: h(k) infinite ({exc})", file=sys.stderr)
        return EXIT_FAIL
    except (PmfError, ModelError, ValueError, OverflowError) as exc:
        print(f"harmonia: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
