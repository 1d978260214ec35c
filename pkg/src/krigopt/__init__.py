"""Kriging-based simulation optimization: ordinary and stochastic kriging,
closed-form infill criteria, a sequential optimizer and a benchmark harness
built around a periodic-review (s, S) inventory simulation."""

__version__ = "0.1.0"

from .kernels import KernelFamily, KernelSpec, covariance_matrix, cross_covariance, distance, kernel_value
from .kriging import Dataset, FitConfig, KrigingModel, Prediction, fit_ok, fit_sk, predict_ok, predict_sk
from .acquisition import (augmented_expected_improvement, expected_improvement, lower_confidence_bound,
                          modified_expected_improvement, probability_of_improvement, select_infill)
from .design import Domain, candidate_grid, inventory_domain, latin_hypercube, scale_to_unit, unscale
from .simulators import InventoryParams, simulate_inventory, synthetic_1d
from .optimizer import Algorithm, OptimizerConfig, RunHistory, run

__all__ = [
    "KernelFamily", "KernelSpec", "covariance_matrix", "cross_covariance", "distance", "kernel_value",
    "Dataset", "FitConfig", "KrigingModel", "Prediction", "fit_ok", "fit_sk", "predict_ok", "predict_sk",
    "augmented_expected_improvement", "expected_improvement", "lower_confidence_bound",
    "modified_expected_improvement", "probability_of_improvement", "select_infill",
    "Domain", "candidate_grid", "inventory_domain", "latin_hypercube", "scale_to_unit", "unscale",
    "InventoryParams", "simulate_inventory", "synthetic_1d",
    "Algorithm", "OptimizerConfig", "RunHistory", "run",
]
