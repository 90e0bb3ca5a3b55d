"""Kernel regression with spectral regularization filters."""

from .estimator import (
    FittedEstimator,
    GridFitContext,
    SpectralKernelRegressor,
    empirical_effective_dimension,
    fit,
    fit_grid,
    predict,
    prepare_grid,
)
from .filters import FilterFamily, empirical_qualification, verify_family_conditions
from .kernels import KernelSpec, cross_kernel, kernel_matrix, load_precomputed
from .spectral import SymmetricSpectrum, eigh_symmetric, operator_norm, power_inequality_gap
from .spectrum import (
    SpectrumModel,
    check_lambda_window,
    effective_dimension,
    lambda_schedule,
    source_norm,
    theorem_bound,
)

__version__ = "0.1.0"

__all__ = [
    "FilterFamily",
    "FittedEstimator",
    "GridFitContext",
    "KernelSpec",
    "SpectralKernelRegressor",
    "SpectrumModel",
    "SymmetricSpectrum",
    "check_lambda_window",
    "cross_kernel",
    "effective_dimension",
    "eigh_symmetric",
    "empirical_effective_dimension",
    "empirical_qualification",
    "fit",
    "fit_grid",
    "kernel_matrix",
    "lambda_schedule",
    "load_precomputed",
    "operator_norm",
    "power_inequality_gap",
    "predict",
    "prepare_grid",
    "source_norm",
    "theorem_bound",
    "verify_family_conditions",
]
