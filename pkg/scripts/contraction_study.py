"""Observed error reduction per step against the predicted Q-linear factor.

For each generated problem the inexact method runs with theta set to a
fraction of the global bound; the script reports the worst observed ratio
``||x_{k+1} - x*|| / ||x_k - x*||`` next to the predicted factor.

    python3 scripts/contraction_study.py --n 200 --density 0.05 --count 20
"""

import argparse
import csv

import numpy as np

from avenewton.generator import GeneratorSpec, generate_instance
from avenewton.solver import SolverConfig, contraction_factor, inexact_newton, theta_bound_global


def study(n, density, count, seed, fractions):
    rows = []
    for i in range(count):
        inst = generate_instance(GeneratorSpec(n, density, seed + i))
        p = inst.problem
        bound = theta_bound_global(p)
        for frac in fractions:
            theta = frac * bound
            r = inexact_newton(p, inst.x0, SolverConfig(theta=theta, keep_iterates=False))
            errs = np.array([t.error_to_planted for t in r.trace])
            ratios = errs[1:] / errs[:-1] if errs.size > 1 else np.array([np.nan])
            rows.append({
                "seed": seed + i,
                "fraction": frac,
                "theta": theta,
                "kappa": contraction_factor(p, theta),
                "worst_ratio": float(np.nanmax(ratios)),
                "iterations": r.iterations,
                "inner_total": sum(t.inner_iterations for t in r.trace),
                "status": r.status.value,
            })
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--density", type=float, default=0.05)
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fractions", default="0,0.25,0.5,0.9999")
    ap.add_argument("--out", default=None, help="optional CSV of all rows")
    args = ap.parse_args()
    fractions = [float(f) for f in args.fractions.split(",")]
    rows = study(args.n, args.density, args.count, args.seed, fractions)

    print(f"{'fraction':>9} {'mean kappa':>11} {'worst ratio':>12} {'mean its':>9} {'inner its':>10} solved")
    for frac in fractions:
        sel = [r for r in rows if r["fraction"] == frac]
        solved = sum(r["status"] == "solution_found" for r in sel)
        print(f"{frac:>9g} {np.mean([r['kappa'] for r in sel]):>11.4f} "
              f"{max(r['worst_ratio'] for r in sel):>12.4f} "
              f"{np.mean([r['iterations'] for r in sel]):>9.2f} "
              f"{np.mean([r['inner_total'] for r in sel]):>10.1f} {solved}/{len(sel)}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
