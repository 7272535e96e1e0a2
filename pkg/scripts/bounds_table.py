#!/usr/bin/env python3
"""Print the minimum-truncation table and the matching error bounds.

For each concentration pair and sample size, reports the smallest (N, M)
meeting the budget under the per-level half-budget rule, together with
the closed-form bound achieved at that truncation.
"""

import argparse

from edpm import BoundQuery, l1_bound, min_truncation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--n", type=int, nargs="+", default=[200, 1000, 2000])
    ap.add_argument("--alphas", type=float, nargs="+",
                    default=[0.5, 1.5, 3.0])
    args = ap.parse_args()

    print(f"{'alpha_t':>8} {'alpha_p':>8} {'n':>6} {'N':>4} {'M':>4} "
          f"{'bound':>12}")
    for at in args.alphas:
        for ap_ in args.alphas:
            for n in args.n:
                N, M = min_truncation(n, at, ap_, args.eps)
                b = l1_bound(BoundQuery(n=n, N=N, M=M, alpha_theta=at,
                                        alpha_psi=ap_)).bound
                print(f"{at:>8.2f} {ap_:>8.2f} {n:>6d} {N:>4d} {M:>4d} "
                      f"{b:>12.4g}")


if __name__ == "__main__":
    main()
