"""Bayesian SAR models: simulation, fitting, model comparison and
Bregman-divergence influence diagnostics."""

from sarinfluence.graph import build_adjacency, edge_list, row_standardize
from sarinfluence.model import (
    PriorConfig,
    SarDataset,
    SarParams,
    contaminate,
    fitted_values,
    impute_yhat,
    log_likelihood,
    log_posterior_kernel,
    log_prior,
    pointwise_log_likelihood,
    sar_simulate,
)
from sarinfluence.sampler import PosteriorDraws, ess, fit, rhat, summarize
from sarinfluence.criteria import ComparisonEntry, compare, loo_cv, waic
from sarinfluence.divergence import (
    AuxiliaryDensity,
    DivergenceReport,
    bregman_divergence,
    is_divergence,
    kl_divergence,
    log_normalizer,
    psi,
    psi_prime,
    supreme_proportion,
)

__version__ = "0.1.0"

__all__ = [
    "AuxiliaryDensity",
    "ComparisonEntry",
    "DivergenceReport",
    "PosteriorDraws",
    "PriorConfig",
    "SarDataset",
    "SarParams",
    "bregman_divergence",
    "build_adjacency",
    "compare",
    "contaminate",
    "edge_list",
    "ess",
    "fit",
    "fitted_values",
    "impute_yhat",
    "is_divergence",
    "kl_divergence",
    "log_likelihood",
    "log_normalizer",
    "log_posterior_kernel",
    "log_prior",
    "loo_cv",
    "pointwise_log_likelihood",
    "psi",
    "psi_prime",
    "rhat",
    "row_standardize",
    "sar_simulate",
    "summarize",
    "supreme_proportion",
    "waic",
]
