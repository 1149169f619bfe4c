"""Reference simulated workload: a random 50-node graph, two covariates,
one SAR response with a single covariate and a contaminated copy."""

from dataclasses import dataclass

import numpy as np

from sarinfluence.graph import random_adjacency, row_standardize
from sarinfluence.model import SarParams, contaminate, sar_simulate

DEFAULT_PARAMS = SarParams(rho=0.75, sigma=1.0, beta=[0.0, 0.3])
COVARIATE_MEANS = (-1.0, 2.0)


@dataclass(frozen=True)
class Workload:
    A: np.ndarray
    W: np.ndarray
    X: np.ndarray
    y: np.ndarray
    z: np.ndarray
    position: int
    seed: int


def simulate_workload(seed, n=50, params=DEFAULT_PARAMS, position=10, level=0.99):
    """Graph, covariates and responses drawn in that order from one generator.

    ``X`` has one column per entry of ``COVARIATE_MEANS`` (unit variance);
    the response uses the first ``len(params.beta) - 1`` columns.
    """
    rng = np.random.default_rng(seed)
    A, _ = random_adjacency(n, rng)
    W = row_standardize(A)
    X = np.column_stack([rng.normal(m, 1.0, n) for m in COVARIATE_MEANS])
    y = sar_simulate(W, X[:, : params.beta.size - 1], params, rng)
    z = contaminate(y, position, level)
    return Workload(A, W, X, y, z, position, seed)
