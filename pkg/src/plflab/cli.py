"""Command-line front end: configuration-driven experiments with stable outputs.

Commands: verify, simulate, measure, invariance, moments, expmoments,
couple, constants.  Exit status: 0 all checks passed, 1 some check failed,
2 configuration error, 3 integration blowup.  Outputs are written
atomically and embed the config hash, so reruns with the same config are
byte-identical (independently of --workers).
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys

from .config import ExperimentConfig, parse_config
from .constants import analysis_constants
from .errors import ConfigurationError, DomainError, IntegrationBlowupError
from .kolmogorov import (
    EmpiricalMeasure,
    default_test_functions,
    drift_matrix,
    estimate_invariant_measure,
    exponential_moment,
    gradient_ratio_experiment,
    measure_functionals,
    moment_inequality_report,
    invariance_residual,
)
from .operators import run_verification_suite
from .sde import couple as couple_pair
from .sde import initial_state, simulate
from .serialize import (
    write_coupled_csv,
    write_json,
    write_measure,
    write_trajectory_csv,
)

COMMANDS = (
    "verify",
    "simulate",
    "measure",
    "invariance",
    "moments",
    "expmoments",
    "couple",
    "constants",
)

INVARIANCE_Z_LIMIT = 3.0
COUPLING_STABILITY_LIMIT = 2.0


def _out(cfg: ExperimentConfig, out_dir: str | None, name: str) -> str:
    d = out_dir if out_dir is not None else cfg.out_dir
    return os.path.join(d, name)


def _echo_config(cfg: ExperimentConfig, out_dir: str | None) -> None:
    payload = cfg.to_dict()
    write_json(_out(cfg, out_dir, "config_echo.json"), payload, config_hash=cfg.hash)


def _obtain_measure(cfg: ExperimentConfig) -> EmpiricalMeasure:
    if cfg.measure_path is not None:
        from .serialize import load_measure

        return load_measure(cfg.measure_path)
    sim = cfg.sim_config()
    return estimate_invariant_measure(
        sim, cfg.burn_in, cfg.thin, initial=initial_state(sim, cfg.initial)
    )


def cmd_verify(cfg: ExperimentConfig, out_dir, workers) -> int:
    report = run_verification_suite(
        cfg.n, cfg.grid(), cfg.params(), n_states=cfg.n_states, seed=cfg.seed
    )
    write_json(_out(cfg, out_dir, "verify.json"), report, config_hash=cfg.hash)
    return 0 if report["all_passed"] else 1


def cmd_simulate(cfg: ExperimentConfig, out_dir, workers) -> int:
    record = simulate(cfg.sim_config(), initial_state(cfg.sim_config(), cfg.initial))
    write_trajectory_csv(_out(cfg, out_dir, "trajectory.csv"), record, config_hash=cfg.hash)
    return 0


def cmd_measure(cfg: ExperimentConfig, out_dir, workers) -> int:
    measure = _obtain_measure(cfg)
    write_measure(
        _out(cfg, out_dir, "measure.csv"),
        _out(cfg, out_dir, "measure_meta.json"),
        measure,
        config_hash=cfg.hash,
    )
    return 0


def cmd_invariance(cfg: ExperimentConfig, out_dir, workers) -> int:
    measure = _obtain_measure(cfg)
    grid, params, noise = cfg.grid(), cfg.params(), cfg.noise()
    drift_rows = drift_matrix(measure, grid, params, noise)
    results = []
    for phi in default_test_functions(cfg.n):
        r = invariance_residual(measure, phi, grid, params, noise, drift_rows=drift_rows)
        r["pass"] = bool(abs(r["zscore"]) <= INVARIANCE_Z_LIMIT)
        results.append(r)
    payload = {
        "n_samples": len(measure),
        "z_limit": INVARIANCE_Z_LIMIT,
        "residuals": results,
        "all_passed": all(r["pass"] for r in results),
    }
    write_json(_out(cfg, out_dir, "invariance.json"), payload, config_hash=cfg.hash)
    return 0 if payload["all_passed"] else 1


def cmd_moments(cfg: ExperimentConfig, out_dir, workers) -> int:
    measure = _obtain_measure(cfg)
    report = moment_inequality_report(measure, cfg.k_max, cfg.grid(), cfg.params(), cfg.noise())
    write_json(_out(cfg, out_dir, "moments.json"), report, config_hash=cfg.hash)
    return 0 if report["all_passed"] else 1


def cmd_expmoments(cfg: ExperimentConfig, out_dir, workers) -> int:
    measure = _obtain_measure(cfg)
    grid, params, noise = cfg.grid(), cfg.params(), cfg.noise()
    consts = analysis_constants(cfg.p, cfg.nu0, noise, grid, cfg.n, seed=cfg.seed)
    functionals = measure_functionals(measure, grid, params, noise)
    ladder = []
    for mult in cfg.eps_ladder:
        eps = mult * consts.eps_star
        ladder.append(
            exponential_moment(
                measure, eps, grid, params, eps_star=consts.eps_star, functionals=functionals
            )
        )
    estimates = [e["estimate"] for e in ladder]
    finite = all(math.isfinite(v) for v in estimates)
    monotone = all(b >= a * (1 - 1e-12) for a, b in zip(estimates, estimates[1:]))
    payload = {
        "eps_star": consts.eps_star,
        "C_p_estimate": consts.C_p_estimate,
        "ladder": ladder,
        "finite": finite,
        "monotone": monotone,
        "all_passed": finite and monotone,
    }
    write_json(_out(cfg, out_dir, "expmoments.json"), payload, config_hash=cfg.hash)
    return 0 if payload["all_passed"] else 1


def cmd_couple(cfg: ExperimentConfig, out_dir, workers) -> int:
    sim = cfg.sim_config()
    x = initial_state(sim, "random_unit_v")
    phi = default_test_functions(cfg.n)[0]
    report = gradient_ratio_experiment(
        sim, x, cfg.separations, phi, cfg.replicas, workers=workers
    )
    finite = all(
        all(math.isfinite(v) for v in entry["ratio_state"])
        for entry in report["per_separation"]
    )
    stable = report["stability_factor"] <= COUPLING_STABILITY_LIMIT
    report["finite"] = finite
    report["stability_limit"] = COUPLING_STABILITY_LIMIT
    report["all_passed"] = bool(finite and stable)
    write_json(_out(cfg, out_dir, "coupling.json"), report, config_hash=cfg.hash)
    # representative coupled pair at the largest separation, for plotting
    from .kolmogorov import perturbation_direction
    from .spectral import SpectralState

    h = max(cfg.separations)
    y = SpectralState(cfg.n, x.coeffs + h * perturbation_direction(sim, len(x.coeffs)))
    rec = couple_pair(sim, x, y, trajectory_index=0)
    write_coupled_csv(_out(cfg, out_dir, "coupled.csv"), rec, config_hash=cfg.hash)
    return 0 if report["all_passed"] else 1


def cmd_constants(cfg: ExperimentConfig, out_dir, workers) -> int:
    consts = analysis_constants(cfg.p, cfg.nu0, cfg.noise(), cfg.grid(), cfg.n, seed=cfg.seed)
    write_json(_out(cfg, out_dir, "constants.json"), consts.to_dict(), config_hash=cfg.hash)
    return 0


_DISPATCH = {
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "measure": cmd_measure,
    "invariance": cmd_invariance,
    "moments": cmd_moments,
    "expmoments": cmd_expmoments,
    "couple": cmd_couple,
    "constants": cmd_constants,
}


def run(cfg: ExperimentConfig, command: str, out_dir: str | None = None, workers: int = 1) -> int:
    """Dispatch one command; returns the process exit status."""
    if command not in _DISPATCH:
        raise ConfigurationError(f"unknown command {command!r}; expected one of {COMMANDS}")
    _echo_config(cfg, out_dir)
    return _DISPATCH[command](cfg, out_dir, workers)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plflab",
        description="Spectral Galerkin lab for a stochastic power-law fluid on the 2D torus.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to a TOML experiment file")
    parser.add_argument("--out", default=None, help="output directory (default: [output] dir)")
    parser.add_argument(
        "--workers",
        type=int,
        default=os.cpu_count() or 1,
        help="worker processes for replica-parallel experiments",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        return run(cfg, args.command, out_dir=args.out, workers=args.workers)
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except IntegrationBlowupError as exc:
        print(f"integration blowup: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
