"""Parametric ROC analysis and cost-weighted optimal cutoffs for skewed biomarkers."""

from .cutoff import DecisionConfig, admissible_interval, optimal_cutoff, risk
from .distributions import DistSpec, Family
from .fitting import fit, select_model
from .inference import population_variance, variance_plugin
from .roc import auc, roc_curve, youden_empirical, youden_parametric

__version__ = "0.1.0"

__all__ = [
    "DecisionConfig", "DistSpec", "Family", "admissible_interval", "auc", "fit",
    "optimal_cutoff", "population_variance", "risk", "roc_curve", "select_model",
    "variance_plugin", "youden_empirical", "youden_parametric",
]
