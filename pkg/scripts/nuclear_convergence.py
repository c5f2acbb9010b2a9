"""Convergence of the kernel expansion in K against the direct branch sum.

    python3 scripts/nuclear_convergence.py --K 5 10 20 40 60
"""
import argparse

from trimap import nuclear_rep
from trimap.acceptance import interior_points


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, nargs="+", default=[5, 10, 20, 30, 40, 60])
    ap.add_argument("--points", type=int, default=10)
    args = ap.parse_args(argv)

    pts = interior_points(args.points)
    for phi in nuclear_rep.default_suite():
        direct = [nuclear_rep.direct_value(phi, p) for p in pts]
        print(f"phi = {phi.name}")
        for K in args.K:
            errs = [abs(nuclear_rep.nuclear_apply(phi, p, K)[0] - d) for p, d in zip(pts, direct)]
            print(f"  K={K:4d}  max |expansion - direct| = {max(errs):.3e}")

    sums = nuclear_rep.summability_report(max(args.K))
    print(f"\nsum_k ||e_k|| ||eta_k|| up to K={max(args.K)}: {sums[-1]:.12f} "
          f"(last increment {sums[-1] - sums[-2]:.2e})")


if __name__ == "__main__":
    main()
