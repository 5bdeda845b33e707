"""Sign-restricted structural VAR estimation through a factor decomposition.

Reduced-form disturbances are modeled as loadings times orthogonal
latent shocks plus idiosyncratic noise; sign and zero restrictions on
the impact responses hold exactly on every posterior draw because the
restricted loadings are sampled from truncated conditionals, with no
accept-reject stage. A compiled kernel backend accelerates the scalar
draws, with a pure-Python twin selected automatically when the
extension is unavailable (override with SIGNVAR_BACKEND=python|cython).
"""

from .core import (
    Dataset,
    FREE,
    MINUS,
    McmcConfig,
    NumericalError,
    PLUS,
    ParameterState,
    ParseError,
    PriorConfig,
    SignPattern,
    SignVarError,
    ValidationError,
    ZERO,
    apply_tcode,
    build_regressors,
    check_identification,
)
from .baseline import (
    AcceptRejectStats,
    ThroughputReport,
    benchmark_throughput,
    haar_rotation,
    rotation_accept_reject,
    sample_reduced_form_niw,
)
from .dgp import (
    BENCHMARK_SIGNS,
    CALIBRATED_LOADINGS,
    CALIBRATED_SIGNS,
    DgpSpec,
    EstimationCase,
    EXTRA_SHOCK_SIGNS,
    MonteCarloResult,
    calibrate_dgp_from_data,
    generate_var_data,
    run_monte_carlo,
    speed_test_dgp,
    standard_mc_cases,
)
from .gibbs import ChainOutput, orthonormalize_factors, run_chain
from .rng import RngStream, derive_seed
from .samplers import BACKEND
from .structural import (
    IrfResult,
    companion_matrix,
    companion_spectral_radius,
    compute_dic,
    compute_irf,
    impact_matrix_pseudo_inverse,
    irf_quantiles,
    log_likelihood,
)

__version__ = "0.1.0"

__all__ = [
    "AcceptRejectStats",
    "BACKEND",
    "BENCHMARK_SIGNS",
    "CALIBRATED_LOADINGS",
    "CALIBRATED_SIGNS",
    "ChainOutput",
    "Dataset",
    "DgpSpec",
    "EstimationCase",
    "EXTRA_SHOCK_SIGNS",
    "FREE",
    "IrfResult",
    "McmcConfig",
    "MonteCarloResult",
    "MINUS",
    "NumericalError",
    "PLUS",
    "ParameterState",
    "ParseError",
    "PriorConfig",
    "SignPattern",
    "SignVarError",
    "ThroughputReport",
    "ValidationError",
    "ZERO",
    "apply_tcode",
    "benchmark_throughput",
    "build_regressors",
    "calibrate_dgp_from_data",
    "check_identification",
    "companion_matrix",
    "companion_spectral_radius",
    "compute_dic",
    "compute_irf",
    "derive_seed",
    "generate_var_data",
    "haar_rotation",
    "impact_matrix_pseudo_inverse",
    "irf_quantiles",
    "log_likelihood",
    "orthonormalize_factors",
    "rotation_accept_reject",
    "run_chain",
    "run_monte_carlo",
    "RngStream",
    "sample_reduced_form_niw",
    "speed_test_dgp",
    "standard_mc_cases",
]
