"""Digit frequencies along several typical orbits against the closed-form law.

    python3 scripts/frequency_table.py --seeds 0 1 2 3 --orbit 10000000 --kmax 8
"""
import argparse

import numpy as np

from trimap import statistics
from trimap.parallel import map_threads


def orbit_report(seed, n, k_max):
    start = statistics.sample_invariant_point(np.random.default_rng(seed))
    return statistics.empirical_frequencies(start, n, k_max, seed_label=f"rng:{seed}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3])
    ap.add_argument("--orbit", type=int, default=10_000_000)
    ap.add_argument("--kmax", type=int, default=8)
    args = ap.parse_args(argv)

    reports = map_threads(lambda s: orbit_report(s, args.orbit, args.kmax), args.seeds)
    emp = np.array([r.empirical for r in reports])
    analytic = reports[0].analytic
    labels = [str(k) for k in range(args.kmax + 1)] + [f">{args.kmax}"]
    print(f"{'k':>4} {'P(k)':>12} {'mean freq':>12} {'spread':>10} {'dev':>10}")
    for i, lab in enumerate(labels):
        col = emp[:, i]
        print(f"{lab:>4} {analytic[i]:12.8f} {col.mean():12.8f} {col.max() - col.min():10.2e} "
              f"{abs(col.mean() - analytic[i]):10.2e}")
    print(f"\norbits: {len(reports)} x {args.orbit} steps; deviations should shrink like 1/sqrt(steps)")


if __name__ == "__main__":
    main()
