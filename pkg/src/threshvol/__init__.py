"""Threshold local-polynomial estimation of jump-diffusion volatility.

The package has three layers: a simulator for jump diffusions observed on
an equispaced grid, the threshold regression estimators of the diffusion
coefficient with their asymptotic constants and confidence intervals, and
a Monte Carlo harness that validates the limit theory empirically.  A CLI
(``threshvol``) and a FastAPI service expose the same operations.
"""

__version__ = "0.1.0"

from .asymptotics import (
    AsymptoticConstants,
    InferenceResult,
    RateParams,
    bias_correction,
    check_rate_conditions,
    confidence_interval,
    normal_cdf,
    normal_quantile,
    optimal_bandwidth,
    variance_constant,
)
from .errors import (
    ConfigError,
    DataError,
    EstimationError,
    ExperimentError,
    QuadratureError,
    SimulationError,
    ThreshvolError,
)
from .estimators import (
    EstimateResult,
    ThresholdSpec,
    classify_increments,
    design_moment,
    local_linear_sigma2,
    local_poly_fit,
    local_time_hat,
    nw_sigma2,
    response_moment,
    threshold_value,
)
from .kernels import (
    KernelSpec,
    builtin_kernel,
    kernel_from_table,
    kernel_moment,
    load_kernel_csv,
)
from .mc import (
    EstimatorChoice,
    ExperimentConfig,
    MCReport,
    ks_distance,
    run_experiment,
    standardize,
)
from .models import build_model, make_diffusion, make_drift
from .simulate import (
    FiniteActivityJumps,
    InfiniteActivityJumps,
    JumpSpec,
    ModelSpec,
    SamplePath,
    VGParams,
    derive_seed,
    sample_fa_jumps,
    sample_ia_increments,
    simulate_path,
)

__all__ = [
    "AsymptoticConstants",
    "ConfigError",
    "DataError",
    "EstimateResult",
    "EstimatorChoice",
    "EstimationError",
    "ExperimentConfig",
    "ExperimentError",
    "FiniteActivityJumps",
    "InferenceResult",
    "InfiniteActivityJumps",
    "JumpSpec",
    "KernelSpec",
    "MCReport",
    "ModelSpec",
    "QuadratureError",
    "RateParams",
    "SamplePath",
    "SimulationError",
    "ThreshvolError",
    "ThresholdSpec",
    "VGParams",
    "bias_correction",
    "build_model",
    "builtin_kernel",
    "check_rate_conditions",
    "classify_increments",
    "confidence_interval",
    "derive_seed",
    "design_moment",
    "kernel_from_table",
    "kernel_moment",
    "ks_distance",
    "load_kernel_csv",
    "local_linear_sigma2",
    "local_poly_fit",
    "local_time_hat",
    "make_diffusion",
    "make_drift",
    "normal_cdf",
    "normal_quantile",
    "nw_sigma2",
    "optimal_bandwidth",
    "response_moment",
    "run_experiment",
    "sample_fa_jumps",
    "sample_ia_increments",
    "simulate_path",
    "standardize",
    "threshold_value",
    "variance_constant",
]
