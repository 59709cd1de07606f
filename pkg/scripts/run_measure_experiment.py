#!/usr/bin/env python3
"""Equilibrate the Galerkin SDE, then run the stationary-measure checks.

Prints the moment-recursion inequalities, the invariance residuals of the
bounded test battery, and an exponential-moment ladder up to the estimated
eps*.  Scale T up (thousands of time units) for publication-grade errors;
the defaults finish in about a minute.
"""

import argparse
import time

from plflab.constants import analysis_constants
from plflab.kolmogorov import (
    default_test_functions,
    drift_matrix,
    estimate_invariant_measure,
    exponential_moment,
    invariance_residual,
    measure_functionals,
    moment_inequality_report,
)
from plflab.operators import FluidParams
from plflab.sde import NoiseSpec, SimConfig
from plflab.spectral import GridSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--p", type=float, default=1.7)
    ap.add_argument("--sigma0", type=float, default=0.5)
    ap.add_argument("--gamma", type=float, default=2.5)
    ap.add_argument("--T", type=float, default=400.0)
    ap.add_argument("--burn-in", type=float, default=40.0)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--thin", type=int, default=25)
    ap.add_argument("--seed", type=int, default=20240)
    args = ap.parse_args()

    config = SimConfig(
        params=FluidParams(p=args.p),
        noise=NoiseSpec(n=args.n, sigma0=args.sigma0, gamma=args.gamma),
        n=args.n,
        grid=GridSpec.for_cutoff(args.n),
        dt=args.dt,
        T=args.T,
        seed=args.seed,
        record_stride=args.thin,
    )
    t0 = time.time()
    measure = estimate_invariant_measure(config, args.burn_in, args.thin)
    print(f"{len(measure)} samples in {time.time() - t0:.0f}s  (T={args.T}, burn-in {args.burn_in})")

    fns = measure_functionals(measure, config.grid, config.params, config.noise)
    rep = moment_inequality_report(measure, 2, config.grid, config.params, config.noise, functionals=fns)
    print("\nmoment recursion (one-sided 95%):")
    for e in rep["entries"]:
        print(
            f"  k={e['k']}: lhs={e['lhs']:.4f}+-{e['lhs_se']:.4f}  rhs={e['rhs']:.4f}  "
            f"diff={e['diff']:+.4f}+-{e['diff_se']:.4f}  pass={e['pass']}"
        )

    print("\ninvariance residuals (3 SE rule):")
    rows = drift_matrix(measure, config.grid, config.params, config.noise)
    for phi in default_test_functions(args.n):
        r = invariance_residual(measure, phi, config.grid, config.params, config.noise, drift_rows=rows)
        print(f"  {phi.name:42s} est={r['estimate']:+.3e} se={r['std_error']:.3e} z={r['zscore']:+.2f}")

    consts = analysis_constants(args.p, 1.0, config.noise, config.grid, args.n)
    print(f"\neps* = {consts.eps_star:.4f}  (C_p = {consts.C_p_estimate:.4f})")
    print("exponential-moment ladder:")
    for mult in (0.1, 0.5, 1.0):
        r = exponential_moment(
            measure, mult * consts.eps_star, config.grid, config.params,
            eps_star=consts.eps_star, functionals=fns,
        )
        print(f"  eps = {mult:.1f} eps*: estimate = {r['estimate']:.4f} +- {r['std_error']:.4f}")


if __name__ == "__main__":
    main()
