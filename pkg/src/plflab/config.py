"""TOML experiment configuration: parsing, defaults, validation, hashing.

Sections are [fluid], [noise], [discretization], [experiment], [output].
Unknown keys are rejected; every module-level invariant is revalidated at
parse time by constructing the corresponding objects.  The canonical hash
of the effective (defaults-filled) config is embedded in every output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigurationError
from .operators import FluidParams
from .sde import NoiseSpec, SimConfig
from .serialize import sha256_of
from .spectral import GridSpec

_SCHEMA = {
    "fluid": {"p", "nu0", "diagnostic"},
    "noise": {"sigma0", "gamma"},
    "discretization": {"n", "M", "dt", "T", "record_stride", "scheme"},
    "experiment": {
        "seed",
        "burn_in",
        "thin",
        "k_max",
        "eps_ladder",
        "separations",
        "replicas",
        "n_states",
        "initial",
        "measure_path",
    },
    "output": {"dir"},
}


@dataclass
class ExperimentConfig:
    """Effective configuration with all defaults filled."""

    p: float = 1.7
    nu0: float = 1.0
    diagnostic: bool = False
    sigma0: float = 0.5
    gamma: float = 2.5
    n: int = 6
    M: int | None = None
    dt: float = 0.01
    T: float = 10.0
    record_stride: int = 10
    scheme: str = "tamed_euler"
    seed: int = 20240
    burn_in: float = 1.0
    thin: int = 10
    k_max: int = 2
    eps_ladder: list = field(default_factory=lambda: [0.1, 0.5, 1.0])
    separations: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    replicas: int = 8
    n_states: int = 200
    initial: str = "zero"
    measure_path: str | None = None
    out_dir: str = "out"

    def __post_init__(self):
        if self.M is None:
            self.M = 4 * self.n
        # construct every component so each module's invariants run now
        self.params()
        self.noise()
        self.grid()
        self.sim_config()
        if self.burn_in >= self.T:
            raise ConfigurationError(
                f"burn_in {self.burn_in} must be shorter than horizon T={self.T}"
            )
        if self.initial not in ("zero", "random_unit_v"):
            raise ConfigurationError(
                f"initial must be 'zero' or 'random_unit_v', got {self.initial!r}"
            )
        for h in self.separations:
            if h <= 0:
                raise ConfigurationError(f"separations must be positive, got {h}")
        for e in self.eps_ladder:
            if e <= 0:
                raise ConfigurationError(f"eps_ladder entries must be positive, got {e}")

    def params(self) -> FluidParams:
        return FluidParams(p=self.p, nu0=self.nu0, diagnostic=self.diagnostic)

    def noise(self) -> NoiseSpec:
        return NoiseSpec(n=self.n, sigma0=self.sigma0, gamma=self.gamma)

    def grid(self) -> GridSpec:
        grid = GridSpec(M=self.M, dealias_factor=self.M / self.n)
        grid.require(self.n, 3 * self.n + 1, "configured experiments")
        return grid

    def sim_config(self) -> SimConfig:
        return SimConfig(
            params=self.params(),
            noise=self.noise(),
            n=self.n,
            grid=self.grid(),
            dt=self.dt,
            T=self.T,
            seed=self.seed,
            scheme=self.scheme,
            record_stride=self.record_stride,
        )

    def to_dict(self) -> dict:
        return {
            "fluid": {"p": self.p, "nu0": self.nu0, "diagnostic": self.diagnostic},
            "noise": {"sigma0": self.sigma0, "gamma": self.gamma},
            "discretization": {
                "n": self.n,
                "M": self.M,
                "dt": self.dt,
                "T": self.T,
                "record_stride": self.record_stride,
                "scheme": self.scheme,
            },
            "experiment": {
                "seed": self.seed,
                "burn_in": self.burn_in,
                "thin": self.thin,
                "k_max": self.k_max,
                "eps_ladder": list(self.eps_ladder),
                "separations": list(self.separations),
                "replicas": self.replicas,
                "n_states": self.n_states,
                "initial": self.initial,
                "measure_path": self.measure_path,
            },
            "output": {"dir": self.out_dir},
        }

    @property
    def hash(self) -> str:
        return sha256_of(self.to_dict())


_FIELD_MAP = {
    ("fluid", "p"): "p",
    ("fluid", "nu0"): "nu0",
    ("fluid", "diagnostic"): "diagnostic",
    ("noise", "sigma0"): "sigma0",
    ("noise", "gamma"): "gamma",
    ("discretization", "n"): "n",
    ("discretization", "M"): "M",
    ("discretization", "dt"): "dt",
    ("discretization", "T"): "T",
    ("discretization", "record_stride"): "record_stride",
    ("discretization", "scheme"): "scheme",
    ("experiment", "seed"): "seed",
    ("experiment", "burn_in"): "burn_in",
    ("experiment", "thin"): "thin",
    ("experiment", "k_max"): "k_max",
    ("experiment", "eps_ladder"): "eps_ladder",
    ("experiment", "separations"): "separations",
    ("experiment", "replicas"): "replicas",
    ("experiment", "n_states"): "n_states",
    ("experiment", "initial"): "initial",
    ("experiment", "measure_path"): "measure_path",
    ("output", "dir"): "out_dir",
}


def parse_config(path: str) -> ExperimentConfig:
    """Parse and validate a TOML experiment file, filling defaults."""
    with open(path, "rb") as f:
        try:
            raw = tomllib.load(f)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
    kwargs = {}
    for section, table in raw.items():
        if section not in _SCHEMA:
            raise ConfigurationError(
                f"{path}: unknown section [{section}]; expected one of {sorted(_SCHEMA)}"
            )
        if not isinstance(table, dict):
            raise ConfigurationError(f"{path}: [{section}] must be a table")
        for key, value in table.items():
            if key not in _SCHEMA[section]:
                raise ConfigurationError(
                    f"{path}: unknown key {key!r} in [{section}]; "
                    f"expected one of {sorted(_SCHEMA[section])}"
                )
            kwargs[_FIELD_MAP[(section, key)]] = value
    return ExperimentConfig(**kwargs)
