"""Time integration of the Galerkin SDE and synchronous coupling.

The scheme is tamed explicit Euler-Maruyama,

    u_{i+1} = u_i + dt F(u_i) / (1 + dt |F(u_i)|_H) + sum_k sigma_k dW_k e_k,

with drift F = Ap + B.  Taming keeps single steps bounded without nonlinear
solves; the drift is only locally Lipschitz (quadratic convection,
degenerate-monotone stress), so plain explicit Euler can explode.

Reproducibility contract: a trajectory is a pure function of its SimConfig.
Per-trajectory generators are counter-based (Philox keyed by a mixed seed),
and per-step increments are drawn for all modes at once in the canonical
mode order, so batches reproduce independently of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, DomainError, IntegrationBlowupError
from .operators import FluidParams, apply_Ap, apply_B, random_state
from .spectral import (
    _GRADE_W,
    _SYM_W,
    GridSpec,
    SpectralState,
    get_basis_cache,
    get_tables,
    sobolev_norm,
)


@dataclass(frozen=True)
class NoiseSpec:
    """Diagonal spectral covariance: Q e_k = sigma_k^2 e_k, sigma_k = sigma0 |k|^-gamma.

    gamma > 2 keeps the continuum series sum sigma_k^2 |k|^2 finite, which is
    the trace-class-in-V requirement the forcing must satisfy.
    """

    n: int
    sigma0: float
    gamma: float = 2.5

    def __post_init__(self):
        if self.sigma0 < 0:
            raise DomainError(f"sigma0 must be nonnegative, got {self.sigma0}")
        if self.gamma <= 2:
            raise ConfigurationError(
                f"gamma must exceed 2: trace-class forcing needs "
                f"sum sigma_k^2 |k|^2 < infinity, got gamma={self.gamma}"
            )

    def sigmas(self) -> np.ndarray:
        """Per-mode sigma_k in canonical mode order."""
        norm_sq = get_basis_cache(self.n).norm_sq_modes
        return self.sigma0 * norm_sq ** (-self.gamma / 2.0)

    def sigma_for(self, k) -> float:
        kn = float(k.norm_sq) if hasattr(k, "norm_sq") else float(k[0] ** 2 + k[1] ** 2)
        return self.sigma0 * kn ** (-self.gamma / 2.0)

    # scalar summaries of Q at this cutoff
    @property
    def trace_q(self) -> float:
        return float(np.sum(self.sigmas() ** 2))

    @property
    def trace_aq(self) -> float:
        """tr (-A) Q = sum sigma_k^2 |k|^2."""
        return float(np.sum(self.sigmas() ** 2 * get_basis_cache(self.n).norm_sq_modes))

    @property
    def op_norm_v(self) -> float:
        """Operator norm of Q on V (= sup sigma_k^2 for diagonal Q)."""
        s = self.sigmas()
        return float(np.max(s * s)) if len(s) else 0.0

    @property
    def op_norm_vstar_h(self) -> float:
        """Bound of sqrt(Q): V* -> H, i.e. sup sigma_k^2 |k|^2."""
        s2 = self.sigmas() ** 2 * get_basis_cache(self.n).norm_sq_modes
        return float(np.max(s2)) if len(s2) else 0.0


@dataclass(frozen=True)
class SimConfig:
    """Everything a trajectory depends on; identical configs give identical runs."""

    params: FluidParams
    noise: NoiseSpec
    n: int
    grid: GridSpec
    dt: float
    T: float
    seed: int
    scheme: str = "tamed_euler"
    record_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.T < self.dt:
            raise ConfigurationError(f"horizon T={self.T} shorter than one step dt={self.dt}")
        if self.n < 1:
            raise ConfigurationError(f"cutoff must be >= 1, got {self.n}")
        if self.noise.n != self.n:
            raise ConfigurationError(
                f"noise cutoff {self.noise.n} does not match simulation cutoff {self.n}"
            )
        if self.scheme != "tamed_euler":
            raise ConfigurationError(f"unknown scheme {self.scheme!r}; only 'tamed_euler'")
        if self.record_stride < 1:
            raise ConfigurationError(f"record_stride must be >= 1, got {self.record_stride}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must fit in an unsigned 64-bit integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


def _mix64(i: int) -> int:
    """splitmix64 finalizer; spreads a counter over 64 bits."""
    z = (i + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def trajectory_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for trajectory `index` of a batch."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed ^ _mix64(index))))


def initial_state(config: SimConfig, kind: str = "zero") -> SpectralState:
    """Default initial data: zero, or a seeded random state with |x|_V = 1."""
    if kind == "zero":
        return SpectralState.zero(config.n)
    if kind == "random_unit_v":
        return random_state(config.n, trajectory_rng(config.seed ^ 0xA5A5A5A5, 0), norm_v=1.0)
    raise ConfigurationError(f"unknown initial state kind {kind!r}")


@dataclass
class TrajectoryRecord:
    """Observables along one trajectory, sampled every record_stride steps.

    Columns: t, |u|_H, |u|_V, |u|_{1,p}, I_p(u), and the running integral
    of I_p along the path (left-endpoint rule, accumulated every step).
    """

    times: np.ndarray
    norm_h: np.ndarray
    norm_v: np.ndarray
    norm_1p: np.ndarray
    ip: np.ndarray
    int_ip: np.ndarray
    snapshots: np.ndarray | None = None
    final_state: SpectralState | None = None

    CSV_COLUMNS = ("t", "normH", "normV", "norm1p", "Ip", "intIp")

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("record times must be strictly increasing")

    def rows(self):
        return zip(self.times, self.norm_h, self.norm_v, self.norm_1p, self.ip, self.int_ip)


@dataclass
class CoupledRecord:
    """Separation history of two trajectories driven by the same noise path."""

    times: np.ndarray
    norm_z: np.ndarray
    initial_separation: float
    endpoint_u: SpectralState
    endpoint_v: SpectralState

    CSV_COLUMNS = ("t", "normZ")

    def rows(self):
        return zip(self.times, self.norm_z)


class _Stepper:
    """Workspace bound to one (cutoff, grid, params): fast drift and taming."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.tab = get_tables(config.n, config.grid.M)
        self.params = config.params
        self.norm_sq = get_basis_cache(config.n).norm_sq_modes
        self.sigmas = config.noise.sigmas()
        self.sqrt_dt = math.sqrt(config.dt)
        self.p = config.params.p
        self.nu0 = config.params.nu0

    def drift(self, a: np.ndarray) -> np.ndarray:
        tab = self.tab
        E = tab.synth("sym", a)
        shear_sq = np.einsum("c,cxy->xy", _SYM_W, E * E)
        S = (self.nu0 * (1.0 + shear_sq) ** (0.5 * (self.p - 2.0)))[None] * E
        ap = -tab.project("sym", S, comp_weights=_SYM_W)
        u = tab.synth("vel", a)
        g = tab.synth("grad", a)
        advect = np.stack([u[0] * g[0] + u[1] * g[1], u[0] * g[2] + u[1] * g[3]])
        return ap - tab.project("vel", advect)

    def ip(self, a: np.ndarray) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            tab = self.tab
            E = tab.synth("sym", a)
            gE = tab.synth("gradE", a)
            e_sq = np.einsum("c,cxy->xy", _SYM_W, E * E)
            ge_sq = np.einsum("c,cxy->xy", _GRADE_W, gE * gE)
            return float(
                tab.cell_weight * np.sum((1.0 + e_sq) ** (0.5 * (self.p - 2.0)) * ge_sq)
            )

    def step(self, a: np.ndarray, raw_increment: np.ndarray) -> np.ndarray:
        """One tamed Euler step; raw_increment holds N(0, dt) draws per mode.

        Overflow is allowed to propagate as inf/nan; callers detect it with
        the finiteness check and raise a structured blowup error.
        """
        with np.errstate(over="ignore", invalid="ignore"):
            f = self.drift(a)
            fnorm = math.sqrt(abs(float(np.dot(f, f))))
            dt = self.config.dt
            return a + (dt / (1.0 + dt * fnorm)) * f + self.sigmas * raw_increment



def drift(state: SpectralState, grid: GridSpec, params: FluidParams) -> SpectralState:
    """Full nonlinear drift Ap(u) + B(u, u)."""
    return apply_Ap(state, grid, params) + apply_B(state, state, grid)


def tamed_step(
    state: SpectralState, dt: float, noise_increment: np.ndarray, config: SimConfig
) -> SpectralState:
    """One tamed Euler step from `state`.

    noise_increment carries raw N(0, dt) draws per mode in canonical order;
    they are scaled by sigma_k here.  Raises IntegrationBlowupError if the
    updated state is non-finite.
    """
    if dt != config.dt:
        config = replace(config, dt=dt, T=max(config.T, dt))
    stepper = _Stepper(config)
    out = stepper.step(state.coeffs, np.asarray(noise_increment, dtype=float))
    if not np.all(np.isfinite(out)):
        raise IntegrationBlowupError(dt, 1, {"normH": state.norm_h()})
    return SpectralState(state.n, out)


def _observables(stepper: _Stepper, a: np.ndarray, grid: GridSpec, p: float):
    state = SpectralState(stepper.config.n, a)
    return (
        state.norm_h(),
        state.norm_v(),
        sobolev_norm(state, grid, 1, p),
        stepper.ip(a),
    )


def simulate(
    config: SimConfig,
    initial: SpectralState,
    keep_snapshots: bool = False,
    trajectory_index: int = 0,
) -> TrajectoryRecord:
    """Integrate the Galerkin SDE and record observables.

    Records at step multiples of record_stride (including t = 0) and at the
    final step.  The running integral of I_p accumulates every step.
    """
    if initial.n != config.n:
        raise ConfigurationError(
            f"initial state cutoff {initial.n} does not match config cutoff {config.n}"
        )
    if not initial.is_finite():
        raise DomainError("initial state is not finite")
    stepper = _Stepper(config)
    rng = trajectory_rng(config.seed, trajectory_index)
    dim = len(initial.coeffs)
    a = initial.coeffs.copy()
    n_steps = config.n_steps
    grid, p = config.grid, config.params.p

    times, nh, nv, n1p, ips, iips = [], [], [], [], [], []
    snaps = [] if keep_snapshots else None
    int_ip = 0.0

    def record(step: int):
        t = step * config.dt
        h, v, s1p, ip = _observables(stepper, a, grid, p)
        times.append(t)
        nh.append(h)
        nv.append(v)
        n1p.append(s1p)
        ips.append(ip)
        iips.append(int_ip)
        if snaps is not None:
            snaps.append(a.copy())

    record(0)
    for step in range(n_steps):
        int_ip += stepper.ip(a) * config.dt
        a = stepper.step(a, rng.standard_normal(dim) * stepper.sqrt_dt)
        if not np.all(np.isfinite(a)):
            raise IntegrationBlowupError(
                (step + 1) * config.dt,
                step + 1,
                {
                    "dt": config.dt,
                    "cutoff": config.n,
                    "last_normH": nh[-1],
                    "last_normV": nv[-1],
                },
            )
        if (step + 1) % config.record_stride == 0 or step + 1 == n_steps:
            record(step + 1)

    return TrajectoryRecord(
        times=np.array(times),
        norm_h=np.array(nh),
        norm_v=np.array(nv),
        norm_1p=np.array(n1p),
        ip=np.array(ips),
        int_ip=np.array(iips),
        snapshots=np.array(snaps) if snaps is not None else None,
        final_state=SpectralState(config.n, a.copy()),
    )


def couple(
    config: SimConfig,
    x: SpectralState,
    y: SpectralState,
    trajectory_index: int = 0,
    observer=None,
) -> CoupledRecord:
    """Advance two trajectories with identical per-step noise increments.

    The same increment array is applied to both states, so the difference
    dynamics is purely drift-driven.  `observer(t, u, v)` is called at every
    record time with the raw coefficient vectors.
    """
    if x.n != y.n:
        raise ConfigurationError(f"cutoff mismatch: {x.n} vs {y.n}")
    if x.n != config.n:
        raise ConfigurationError(
            f"state cutoff {x.n} does not match config cutoff {config.n}"
        )
    stepper = _Stepper(config)
    rng = trajectory_rng(config.seed, trajectory_index)
    dim = len(x.coeffs)
    au = x.coeffs.copy()
    av = y.coeffs.copy()
    n_steps = config.n_steps

    times, nz = [], []

    def record(step: int):
        t = step * config.dt
        times.append(t)
        nz.append(float(np.sqrt(np.sum((au - av) ** 2))))
        if observer is not None:
            observer(t, au, av)

    record(0)
    for step in range(n_steps):
        dw = rng.standard_normal(dim) * stepper.sqrt_dt
        au = stepper.step(au, dw)
        av = stepper.step(av, dw)
        if not (np.all(np.isfinite(au)) and np.all(np.isfinite(av))):
            raise IntegrationBlowupError(
                (step + 1) * config.dt, step + 1, {"dt": config.dt, "last_normZ": nz[-1]}
            )
        if (step + 1) % config.record_stride == 0 or step + 1 == n_steps:
            record(step + 1)

    return CoupledRecord(
        times=np.array(times),
        norm_z=np.array(nz),
        initial_separation=float(np.sqrt(np.sum((x.coeffs - y.coeffs) ** 2))),
        endpoint_u=SpectralState(config.n, au),
        endpoint_v=SpectralState(config.n, av),
    )
