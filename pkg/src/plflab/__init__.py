"""plflab: spectral Galerkin lab for a stochastic power-law fluid on the torus."""

__version__ = "0.1.0"

from .spectral import (  # noqa: F401
    GridSpec,
    PhysicalField,
    SpectralState,
    SymTensorField,
    WaveIndex,
    analyze,
    basis_eval,
    dissipation_Ip,
    mode_list,
    sobolev_norm,
    sym_gradient,
    synthesize,
)
from .operators import (  # noqa: F401
    FluidParams,
    VerificationReport,
    apply_Ap,
    apply_B,
    apply_stokes,
    stress_tensor,
    verify_identities,
)
from .sde import (  # noqa: F401
    CoupledRecord,
    NoiseSpec,
    SimConfig,
    TrajectoryRecord,
    couple,
    drift,
    simulate,
    tamed_step,
)
from .cylinder import CylinderFunction, coord, gauss_bump, tanh_of  # noqa: F401
from .kolmogorov import (  # noqa: F401
    EmpiricalMeasure,
    apply_K,
    estimate_invariant_measure,
    exponential_moment,
    gradient_ratio_experiment,
    invariance_residual,
    moment_inequality_report,
)
from .constants import AnalysisConstants, analysis_constants  # noqa: F401
from .errors import ConfigurationError, DomainError, IntegrationBlowupError  # noqa: F401
