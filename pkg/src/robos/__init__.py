"""Robust satisficing Gaussian-process bandits under context distribution shift."""

from .fragility import (
    FragilityResult,
    RegularizationPath,
    SolverError,
    dro_worst_case,
    estimated_fragility,
    grid_oracle_fragility,
    inner_min,
    true_fragility,
)
from .gp import GPPosterior, GridSpec
from .kernels import KernelSpec, ProductKernel
from .policies import PolicyConfig, TauRule
from .simplex import MmdMetric, mmd

__version__ = "0.1.0"

__all__ = [
    "FragilityResult", "RegularizationPath", "SolverError", "dro_worst_case",
    "estimated_fragility", "grid_oracle_fragility", "inner_min", "true_fragility",
    "GPPosterior", "GridSpec", "KernelSpec", "ProductKernel", "PolicyConfig", "TauRule",
    "MmdMetric", "mmd",
]
