"""Kolmogorov operator on cylinder functions and invariant-measure experiments.

The operator acts on a finitely based phi as

    (K phi)(x) = 1/2 sum_i sigma_{k_i}^2 d2_ii phi + sum_i drift_{k_i}(x) d_i phi,

exact for diagonal covariance: only phi's own coordinates contribute to the
trace term.  The invariant measure of the Galerkin SDE is estimated by the
ergodic time-average variant of occupation-measure averaging: one long
trajectory, burn-in discarded, thinned snapshots with equal weights.  Sample
statistics use batch means throughout, since thinned snapshots of a single
path stay serially correlated.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cylinder import CylinderFunction, coord, gauss_bump, tanh_of
from .errors import ConfigurationError, DomainError, IntegrationBlowupError
from .operators import FluidParams
from .sde import NoiseSpec, SimConfig, _Stepper, couple, initial_state, trajectory_rng
from .sde import drift as full_drift
from .spectral import GridSpec, SpectralState, mode_index
from .stats import Z_ONE_SIDED_95, batch_mean_stderr, replica_mean_stderr


@dataclass
class EmpiricalMeasure:
    """Equal-weight sample set of states approximating an invariant measure.

    samples is an (N, dim) coefficient matrix in the canonical mode order;
    metadata records burn-in, thinning, total simulated time, seed and the
    config hash so runs are auditable.
    """

    n: int
    samples: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.samples.ndim != 2:
            raise ConfigurationError("samples must be an (N, dim) matrix")
        if len(self.samples) < 2:
            raise ConfigurationError(
                f"need at least 2 samples for any variance estimate, got {len(self.samples)}"
            )

    def __len__(self):
        return len(self.samples)

    @property
    def weights(self) -> np.ndarray:
        return np.full(len(self.samples), 1.0 / len(self.samples))

    def states(self):
        for row in self.samples:
            yield SpectralState(self.n, row)


def estimate_invariant_measure(
    config: SimConfig, burn_in: float, thin: int, initial: SpectralState | None = None
) -> EmpiricalMeasure:
    """Time-average sampling of a single long trajectory after burn-in.

    thin is the stride in steps between retained snapshots; the first
    snapshot is taken thin steps after the end of burn-in.  The trajectory
    starts from zero unless an initial state is given (a large initial
    state with burn_in = 0 produces a deliberately unequilibrated measure,
    useful as a negative control).
    """
    if burn_in < 0:
        raise ConfigurationError(f"burn_in must be nonnegative, got {burn_in}")
    if burn_in >= config.T:
        raise ConfigurationError(f"burn_in {burn_in} must be shorter than horizon {config.T}")
    if thin < 1:
        raise ConfigurationError(f"thin must be >= 1, got {thin}")
    stepper = _Stepper(config)
    rng = trajectory_rng(config.seed, 0)
    from .serialize import config_hash

    if initial is not None and initial.n != config.n:
        raise ConfigurationError(
            f"initial state cutoff {initial.n} does not match config cutoff {config.n}"
        )
    a = (initial if initial is not None else initial_state(config, "zero")).coeffs.copy()
    dim = len(a)
    burn_steps = int(round(burn_in / config.dt))
    n_steps = config.n_steps
    samples = []
    for step in range(n_steps):
        a = stepper.step(a, rng.standard_normal(dim) * stepper.sqrt_dt)
        if not np.all(np.isfinite(a)):
            raise IntegrationBlowupError((step + 1) * config.dt, step + 1, {"dt": config.dt})
        s = step + 1
        if s > burn_steps and (s - burn_steps) % thin == 0:
            samples.append(a.copy())
    if len(samples) < 2:
        raise ConfigurationError(
            f"run produced {len(samples)} samples; lengthen T or reduce thin"
        )
    meta = {
        "burn_in": burn_in,
        "thin": thin,
        "total_time": config.T,
        "dt": config.dt,
        "seed": config.seed,
        "config_hash": config_hash(config),
    }
    return EmpiricalMeasure(n=config.n, samples=np.array(samples), metadata=meta)


def drift_matrix(measure: EmpiricalMeasure, grid: GridSpec, params: FluidParams, noise: NoiseSpec) -> np.ndarray:
    """Drift coefficients for every sample; reusable across test functions."""
    config = _probe_config(measure, grid, params, noise)
    stepper = _Stepper(config)
    return np.array([stepper.drift(row) for row in measure.samples])


def measure_functionals(measure: EmpiricalMeasure, grid: GridSpec, params: FluidParams, noise: NoiseSpec) -> dict:
    """Per-sample I_p and V-norm arrays for moment experiments."""
    config = _probe_config(measure, grid, params, noise)
    stepper = _Stepper(config)
    ip = np.array([stepper.ip(row) for row in measure.samples])
    norm_sq = stepper.norm_sq
    norm_v = np.sqrt(np.einsum("ij,j,ij->i", measure.samples, norm_sq, measure.samples))
    return {"ip": ip, "norm_v": norm_v}


def _probe_config(measure: EmpiricalMeasure, grid, params, noise) -> SimConfig:
    # dt/T are irrelevant for pointwise functionals; only n/grid/params matter
    return SimConfig(
        params=params, noise=noise, n=measure.n, grid=grid, dt=1.0, T=1.0, seed=0
    )


def apply_K(
    phi: CylinderFunction,
    x: SpectralState,
    grid: GridSpec,
    params: FluidParams,
    noise: NoiseSpec,
) -> float:
    """Evaluate (K phi)(x) with exact derivatives of phi."""
    slots = [mode_index(x.n, k) for k in phi.indices]
    coords = x.coeffs[slots]
    _, g, h = phi.body.value_grad_hess(coords)
    sig = np.array([noise.sigma_for(k) for k in phi.indices])
    drift_coeffs = full_drift(x, grid, params).coeffs[slots]
    return float(0.5 * np.dot(sig * sig, np.diag(h)) + np.dot(drift_coeffs, g))


def _k_values(
    measure: EmpiricalMeasure,
    phi: CylinderFunction,
    noise: NoiseSpec,
    drift_rows: np.ndarray,
) -> np.ndarray:
    slots = [mode_index(measure.n, k) for k in phi.indices]
    sig_sq = np.array([noise.sigma_for(k) ** 2 for k in phi.indices])
    out = np.empty(len(measure.samples))
    for i, row in enumerate(measure.samples):
        _, g, h = phi.body.value_grad_hess(row[slots])
        out[i] = 0.5 * np.dot(sig_sq, np.diag(h)) + np.dot(drift_rows[i][slots], g)
    return out


def invariance_residual(
    measure: EmpiricalMeasure,
    phi: CylinderFunction,
    grid: GridSpec,
    params: FluidParams,
    noise: NoiseSpec,
    drift_rows: np.ndarray | None = None,
) -> dict:
    """Sample mean and batch-means standard error of K phi over the measure.

    The headline statistic is estimate / std_error; at equilibrium it should
    sit inside a few standard errors of zero.
    """
    phi.require_bounded()
    if drift_rows is None:
        drift_rows = drift_matrix(measure, grid, params, noise)
    values = _k_values(measure, phi, noise, drift_rows)
    estimate, std_error = batch_mean_stderr(values)
    z = estimate / std_error if std_error > 0 else (0.0 if estimate == 0 else math.inf)
    return {"phi": phi.name, "estimate": estimate, "std_error": std_error, "zscore": z}


def moment_inequality_report(
    measure: EmpiricalMeasure,
    k_max: int,
    grid: GridSpec,
    params: FluidParams,
    noise: NoiseSpec,
    functionals: dict | None = None,
) -> dict:
    """Monte Carlo check of the stationary moment recursion for k = 0..k_max.

    For each k the inequality

      2 nu0 (p-1) E[I_p (1+|x|_V^2)^{pk/2}] <= (tr(-A)Q + pk |Q|_{L(V)}) E[(1+|x|_V^2)^{pk/2}]

    is tested one-sidedly at the 95% level on the per-sample differences.
    """
    if k_max < 0:
        raise ConfigurationError(f"k_max must be >= 0, got {k_max}")
    if functionals is None:
        functionals = measure_functionals(measure, grid, params, noise)
    ip, norm_v = functionals["ip"], functionals["norm_v"]
    p, nu0 = params.p, params.nu0
    tr_aq, op_qv = noise.trace_aq, noise.op_norm_v
    entries = []
    for k in range(k_max + 1):
        w = (1.0 + norm_v**2) ** (0.5 * p * k)
        lhs = 2.0 * nu0 * (p - 1.0) * ip * w
        rhs = (tr_aq + p * k * op_qv) * w
        lhs_mean, lhs_se = batch_mean_stderr(lhs)
        rhs_mean, rhs_se = batch_mean_stderr(rhs)
        diff_mean, diff_se = batch_mean_stderr(lhs - rhs)
        entries.append(
            {
                "k": k,
                "lhs": lhs_mean,
                "lhs_se": lhs_se,
                "rhs": rhs_mean,
                "rhs_se": rhs_se,
                "diff": diff_mean,
                "diff_se": diff_se,
                "pass": bool(diff_mean <= Z_ONE_SIDED_95 * diff_se),
            }
        )
    return {
        "k_max": k_max,
        "n_samples": len(measure),
        "trace_aq": tr_aq,
        "op_norm_v": op_qv,
        "entries": entries,
        "all_passed": all(e["pass"] for e in entries),
    }


def exponential_moment(
    measure: EmpiricalMeasure,
    eps: float,
    grid: GridSpec,
    params: FluidParams,
    eps_star: float = math.nan,
    functionals: dict | None = None,
    noise: NoiseSpec | None = None,
) -> dict:
    """Monte Carlo estimate of the exponentially weighted dissipation moment.

    Overflow of the exponent is reported as an infinite estimate, never a
    crash.  eps_star is carried through for context only.
    """
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if functionals is None:
        if noise is None:
            noise = NoiseSpec(n=measure.n, sigma0=0.0)
        functionals = measure_functionals(measure, grid, params, noise)
    ip, norm_v = functionals["ip"], functionals["norm_v"]
    with np.errstate(over="ignore"):
        values = ip * np.exp(eps * norm_v**params.p)
    if not np.all(np.isfinite(values)):
        return {"eps": eps, "estimate": math.inf, "std_error": math.inf, "eps_star": eps_star}
    estimate, std_error = batch_mean_stderr(values)
    return {"eps": eps, "estimate": estimate, "std_error": std_error, "eps_star": eps_star}


# ---------------------------------------------------------------------------
# coupling / gradient experiment
# ---------------------------------------------------------------------------


def perturbation_direction(config: SimConfig, dim: int) -> np.ndarray:
    """Fixed random unit direction derived from the config seed."""
    rng = trajectory_rng(config.seed ^ 0x5EED, 0)
    direction = rng.standard_normal(dim)
    return direction / np.linalg.norm(direction)


def _coupled_replica(args):
    """Worker for one coupled pair; top-level so process pools can pickle it."""
    config, x_coeffs, y_coeffs, index, slots = args
    n = config.n
    phi_u, phi_v, zs, ts = [], [], [], []

    def observer(t, au, av):
        ts.append(t)
        phi_u.append(au[slots].copy())
        phi_v.append(av[slots].copy())

    rec = couple(
        config,
        SpectralState(n, np.asarray(x_coeffs)),
        SpectralState(n, np.asarray(y_coeffs)),
        trajectory_index=index,
        observer=observer,
    )
    return index, rec.norm_z, np.array(ts), np.array(phi_u), np.array(phi_v)


def gradient_ratio_experiment(
    config: SimConfig,
    x: SpectralState,
    separations: list[float],
    phi: CylinderFunction,
    replicas: int,
    workers: int = 1,
) -> dict:
    """Finite-difference probe of the flow map and the transition semigroup.

    For each separation h a fixed random unit direction e (drawn once from
    the config seed, shared across separations for comparability) perturbs
    the initial state.  Over the replicas we estimate, at every record time,

      ratio_state(t) = E |u(t, x+he) - u(t, x)|_H / h
      ratio_semigroup(t) = |E phi(u(t, x+he)) - E phi(u(t, x))| / h,

    fit log ratio_state against t for an empirical growth rate, and report
    the minimal single-exponential envelope rate through the initial value.
    """
    if any(h <= 0 for h in separations):
        raise DomainError("separations must be positive")
    if replicas < 2:
        raise ConfigurationError("need at least 2 replicas")
    phi.require_bounded()
    slots = [mode_index(config.n, k) for k in phi.indices]
    direction = perturbation_direction(config, len(x.coeffs))

    per_h = []
    for h in separations:
        y = SpectralState(config.n, x.coeffs + h * direction)
        jobs = [(config, x.coeffs, y.coeffs, i, slots) for i in range(replicas)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = {r[0]: r for r in pool.map(_coupled_replica, jobs)}
            results = [results[i] for i in range(replicas)]
        else:
            results = [_coupled_replica(j) for j in jobs]

        times = results[0][2]
        norm_z = np.stack([r[1] for r in results])  # (replicas, T)
        ratio_state = np.empty(len(times))
        ratio_state_se = np.empty(len(times))
        ratio_semi = np.empty(len(times))
        ratio_semi_se = np.empty(len(times))
        for j in range(len(times)):
            m, se = replica_mean_stderr(norm_z[:, j] / h)
            ratio_state[j], ratio_state_se[j] = m, se
            dphi = np.array(
                [
                    (phi.value(r[3][j]) - phi.value(r[4][j])) / h
                    for r in results
                ]
            )
            m, se = replica_mean_stderr(dphi)
            ratio_semi[j], ratio_semi_se[j] = abs(m), se

        pos = times > 0
        logs = np.log(ratio_state[pos])
        tpos = times[pos]
        # least-squares growth rate of log ratio against t
        A = np.stack([np.ones_like(tpos), tpos], axis=1)
        coef, *_ = np.linalg.lstsq(A, logs, rcond=None)
        intercept, rate = float(coef[0]), float(coef[1])
        residuals = logs - (intercept + rate * tpos)
        # minimal envelope rate through the t=0 value: smallest C with
        # ratio(t) <= ratio(0) exp(C t) for all recorded t
        envelope_rate = float(np.max(np.log(ratio_state[pos] / ratio_state[0]) / tpos))
        per_h.append(
            {
                "h": h,
                "times": times.tolist(),
                "ratio_state": ratio_state.tolist(),
                "ratio_state_se": ratio_state_se.tolist(),
                "ratio_semigroup": ratio_semi.tolist(),
                "ratio_semigroup_se": ratio_semi_se.tolist(),
                "fit_intercept": intercept,
                "fit_rate": rate,
                "fit_max_abs_residual": float(np.max(np.abs(residuals))),
                "envelope_rate": envelope_rate,
                "mean_ratio_state": float(np.mean(ratio_state)),
            }
        )

    means = [e["mean_ratio_state"] for e in per_h]
    stability = max(means) / min(means) if min(means) > 0 else math.inf
    return {
        "phi": phi.name,
        "separations": list(separations),
        "replicas": replicas,
        "per_separation": per_h,
        "stability_factor": stability,
        "fit_rates": [e["fit_rate"] for e in per_h],
        "envelope_rates": [e["envelope_rate"] for e in per_h],
    }


def default_test_functions(n: int) -> list[CylinderFunction]:
    """Bounded battery over low modes: tanh and Gaussian-bump compositions."""
    if n < 2:
        raise ConfigurationError("test battery needs cutoff n >= 2")
    x0, x1, x2 = coord(0), coord(1), coord(2)
    return [
        CylinderFunction([(1, 0)], tanh_of(x0), name="tanh(x_(1,0))"),
        CylinderFunction([(0, 1)], gauss_bump(x0 - 0.5), name="exp(-(x_(0,1)-1/2)^2)"),
        CylinderFunction(
            [(1, 0), (0, 1)], tanh_of(x0 * x1), name="tanh(x_(1,0) x_(0,1))"
        ),
        CylinderFunction(
            [(1, 1), (1, -1)],
            tanh_of(x0 + 2.0 * x1),
            name="tanh(x_(1,1) + 2 x_(1,-1))",
        ),
        CylinderFunction(
            [(1, 0), (0, 1), (1, 1)],
            gauss_bump(x0) * tanh_of(x1 - x2),
            name="exp(-x_(1,0)^2) tanh(x_(0,1) - x_(1,1))",
        ),
    ]
