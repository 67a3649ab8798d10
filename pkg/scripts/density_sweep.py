"""Median solve time of both methods as the density of A varies at fixed n.

    python3 scripts/density_sweep.py --n 1000 --densities 0.002,0.01,0.05,0.2 --count 5
"""

import argparse

import numpy as np

from avenewton import bench
from avenewton.generator import Suite, SuiteEntry, generate_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--densities", default="0.002,0.01,0.05,0.2")
    ap.add_argument("--count", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--spread", type=float, default=40.0,
                    help="cond(A); pass 0 for the default singular value draw")
    args = ap.parse_args()
    spread = args.spread or None
    print(f"{'density':>8} {'exact s':>9} {'inexact s':>10} {'inexact wins':>13}")
    for dens in (float(d) for d in args.densities.split(",")):
        insts = generate_suite(args.n, dens, args.count, args.seed, rc_spread=spread)
        suite = Suite([SuiteEntry(str(i), x.problem, x.x0) for i, x in enumerate(insts)])
        r = bench.run_suite(suite, bench.METHODS, args.reps)
        med = np.nanmedian(r.time_seconds, axis=0)
        t = np.where(r.solved, r.time_seconds, np.inf)
        wins = int(np.sum(t[:, 1] < t[:, 0]))
        print(f"{dens:>8g} {med[0]:>9.4f} {med[1]:>10.4f} {wins:>8}/{len(insts)}")


if __name__ == "__main__":
    main()
