"""Time exact and inexact Newton on sparse suites and print profile summaries.

Two suites share n, density and seeds: one with the default singular value
draw (cond(A) grows with n) and one with a fixed spread (cond(A) = spread).

    python3 scripts/sparse_comparison.py --n 2000 --density 0.005 --count 10 --out-dir runs/sparse
"""

import argparse
from pathlib import Path

from avenewton import bench
from avenewton.generator import generate_suite, read_suite, write_suite


def run(label, out_dir, n, density, count, seed, reps, jobs, rc_spread):
    suite_dir = out_dir / label
    params = dict(n=n, density=density, count=count, seed=seed, rc_spread=rc_spread)
    write_suite(generate_suite(n, density, count, seed, rc_spread=rc_spread), suite_dir, params)
    results = bench.run_suite(read_suite(suite_dir), bench.METHODS, reps, jobs)
    bench.write_results_csv(results, out_dir / f"{label}_results.csv")
    curves, summaries = bench.performance_profile(results)
    bench.emit_profile_csv(curves, out_dir / f"{label}_profile.csv")
    bench.emit_summary(summaries, out_dir / f"{label}_summary.csv")
    print(f"== {label} (rc_spread={rc_spread})")
    print(bench.format_summary(summaries))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--density", type=float, default=0.005)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--spread", type=float, default=40.0)
    ap.add_argument("--out-dir", default="runs/sparse")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    common = (args.n, args.density, args.count, args.seed, args.reps, args.jobs)
    run("default", out, *common, None)
    run(f"spread{args.spread:g}", out, *common, args.spread)


if __name__ == "__main__":
    main()
