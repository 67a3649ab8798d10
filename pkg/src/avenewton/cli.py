"""Command-line front end.

Exit codes: 0 success, 1 solver did not converge, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .core import load_problem
from .exceptions import AveError
from .generator import GeneratorSpec, generate_suite, manifest_x0_for, read_suite, write_suite
from .rng import PortableRng
from .solver import SolverConfig, solve, verify_hypotheses, write_trace_csv

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_USAGE = 0, 1, 2


class InputError(Exception):
    pass


def _density(text):
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"density must lie in (0, 1], got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def _theta(text):
    if text == "auto":
        return text
    v = float(text)
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError("theta must be 'auto' or lie in [0, 1)")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avenewton", description="Semi-smooth Newton solvers for A x - |x| = b."
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("generate", help="write a random problem suite")
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--density", type=_density, required=True)
    g.add_argument("--count", type=_positive_int, default=1)
    g.add_argument("--seed", type=_nonneg_int, default=0)
    g.add_argument("--out-dir", required=True)
    g.add_argument("--no-sv-rescale", action="store_true")
    g.add_argument("--rc-spread", type=float, default=None,
                   help="fix cond(A) by drawing singular values log-uniformly")

    s = sub.add_parser("solve", help="solve one problem file")
    s.add_argument("--problem", required=True)
    s.add_argument("--method", choices=("exact", "inexact"), default="inexact")
    s.add_argument("--theta", type=_theta, default=None)
    s.add_argument("--tol", type=_positive_float, default=1e-8)
    s.add_argument("--max-iter", type=_nonneg_int, default=50)
    s.add_argument("--x0", default=None, help="zero | random:<seed> | file:<path>")
    s.add_argument("--trace", default=None, help="write the iteration trace as CSV")

    v = sub.add_parser("verify", help="check the convergence hypotheses")
    v.add_argument("--problem", required=True)

    b = sub.add_parser("bench", help="time methods over a suite")
    b.add_argument("--suite", required=True)
    b.add_argument("--methods", default="exact,inexact")
    b.add_argument("--reps", type=_positive_int, default=10)
    b.add_argument("--out", default="results.csv")
    b.add_argument("--jobs", type=_positive_int, default=None)

    p = sub.add_parser("profile", help="performance profiles from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--window", type=float, default=0.05)
    p.add_argument("--out-prefix", default="profile")
    return parser


def _start_point(spec, problem_path, n):
    if spec is None:
        x0 = manifest_x0_for(problem_path)
        return np.zeros(n) if x0 is None else x0
    if spec == "zero":
        return np.zeros(n)
    if spec.startswith("random:"):
        try:
            seed = int(spec.split(":", 1)[1])
        except ValueError:
            raise InputError(f"bad --x0 seed in {spec!r}") from None
        return PortableRng(seed, stream=3).uniform(n, -100.0, 100.0)
    if spec.startswith("file:"):
        path = spec.split(":", 1)[1]
        text = Path(path).read_text(encoding="utf-8")
        try:
            x0 = np.array(json.loads(text), dtype=np.float64)
        except (json.JSONDecodeError, ValueError, TypeError):
            x0 = np.array(text.split(), dtype=np.float64)
        if x0.shape != (n,):
            raise InputError(f"--x0 file has {x0.size} entries, expected {n}")
        return x0
    raise InputError(f"unrecognized --x0 {spec!r}")


def cmd_generate(args) -> int:
    if args.rc_spread is not None and args.rc_spread < 1:
        raise InputError("--rc-spread must be >= 1")
    instances = generate_suite(
        args.n, args.density, args.count, args.seed,
        sv_rescale=not args.no_sv_rescale, rc_spread=args.rc_spread,
    )
    params = {
        "n": args.n, "density": args.density, "count": args.count, "seed": args.seed,
        "sv_rescale": not args.no_sv_rescale, "rc_spread": args.rc_spread,
        "solution_range": [-100.0, 100.0],
    }
    path = write_suite(instances, args.out_dir, params)
    print(path)
    return EXIT_OK


def cmd_solve(args) -> int:
    problem = load_problem(args.problem)
    x0 = _start_point(args.x0, args.problem, problem.n)
    cfg = SolverConfig(
        method=args.method,
        theta="auto" if args.theta is None else args.theta,
        outer_tol=args.tol,
        max_outer=args.max_iter,
    )
    report = solve(problem, x0, cfg)
    if report.solved:
        print("Solution found")
    else:
        print(f"Failure: {report.status}")
    print(f"status: {report.status}")
    print(f"iterations: {report.iterations}")
    print(f"final residual: {report.final_residual:.6e}")
    if args.method == "inexact":
        print(f"theta: {report.theta_used:.6g}")
    for note in report.notes:
        print(f"note: {note}")
    if args.trace:
        write_trace_csv(report, args.trace)
    return EXIT_OK if report.solved else EXIT_NOT_CONVERGED


def cmd_verify(args) -> int:
    problem = load_problem(args.problem)
    for flag in verify_hypotheses(problem).flags:
        print(flag.line())
    return EXIT_OK


def cmd_bench(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in bench.METHODS]
    if bad or not methods:
        raise InputError(f"unknown methods: {', '.join(bad) or '(none)'}")
    suite = read_suite(args.suite)
    results = bench.run_suite(suite, methods, args.reps, args.jobs)
    bench.write_results_csv(results, args.out)
    solved = results.solved.sum(axis=0)
    for m, k in zip(methods, solved):
        print(f"{m}: solved {k}/{len(results.problems)}")
    print(args.out)
    return EXIT_OK


def cmd_profile(args) -> int:
    if args.window < 0:
        raise InputError("--window must be nonnegative")
    results = bench.read_results_csv(args.results)
    curves, summaries = bench.performance_profile(results, args.window)
    bench.emit_profile_csv(curves, f"{args.out_prefix}_profile.csv")
    bench.emit_summary(summaries, f"{args.out_prefix}_summary.csv", args.window)
    print(bench.format_summary(summaries))
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "bench": cmd_bench,
    "profile": cmd_profile,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "solve" and args.method == "exact" and args.theta is not None:
        parser.error("--theta only applies to --method inexact")
    try:
        return COMMANDS[args.subcommand](args)
    except (InputError, AveError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
