"""Simulation lab: synthetic tasks, exact risks and replicated experiments."""

from .concentration import ConcentrationResult, FeatureModel, concentration_trial, moment_bound, tail_bound
from .experiment import (
    BoundCheck,
    ReplicateRecord,
    RiskReport,
    bound_check,
    simulation_grid,
    rate_experiment,
    run_experiment,
    validation_rate_experiment,
)
from .risk import (
    BiasVariance,
    bias_variance_split,
    estimate_rate,
    exact_mu_mse,
    select_lambda,
    validation_mse,
)
from .task import Dataset, SyntheticTask, replicate_seed, sample_dataset

__all__ = [
    "BiasVariance",
    "BoundCheck",
    "ConcentrationResult",
    "Dataset",
    "FeatureModel",
    "ReplicateRecord",
    "RiskReport",
    "SyntheticTask",
    "bias_variance_split",
    "bound_check",
    "concentration_trial",
    "estimate_rate",
    "exact_mu_mse",
    "moment_bound",
    "simulation_grid",
    "rate_experiment",
    "replicate_seed",
    "run_experiment",
    "sample_dataset",
    "select_lambda",
    "tail_bound",
    "validation_mse",
    "validation_rate_experiment",
]
