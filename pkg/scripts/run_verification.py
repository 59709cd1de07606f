#!/usr/bin/env python3
"""Certify the operator identities and inequalities on a random corpus.

Fits the empirical constants, then prints one line per check with the pass
count and the fitted or explicit constant.
"""

import argparse

from plflab.operators import FluidParams, run_verification_suite
from plflab.spectral import GridSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=8, help="spectral cutoff")
    ap.add_argument("--M", type=int, default=None, help="grid points per axis (default 4n)")
    ap.add_argument("--p", type=float, default=1.7)
    ap.add_argument("--nu0", type=float, default=1.0)
    ap.add_argument("--states", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    M = args.M if args.M is not None else 4 * args.n
    grid = GridSpec(M=M, dealias_factor=M / args.n)
    report = run_verification_suite(
        args.n, grid, FluidParams(p=args.p, nu0=args.nu0),
        n_states=args.states, seed=args.seed,
    )
    print(f"n={args.n} M={M} p={args.p} nu0={args.nu0} states={args.states}")
    print("fitted constants:")
    for k, v in report["fitted_constants"].items():
        print(f"  {k:20s} {v:.6g}")
    print("checks:")
    for name, slot in report["checks"].items():
        print(
            f"  {name:26s} pass={slot['pass']:4d} fail={slot['fail']:2d} "
            f"inconclusive={slot['inconclusive']:2d} constant={slot['constant']:.6g}"
        )
    print("ALL PASSED" if report["all_passed"] else "FAILURES PRESENT")
    return 0 if report["all_passed"] else 1


if __name__ == "__main__":
    raise SystemExit(main())
