"""SAR model: simulation, contamination, likelihood, prior and imputation.

The model is ``y = rho W y + X beta + eps`` with ``eps ~ N(0, sigma^2 I)``.
An intercept column is always prepended to the covariates, so ``beta``
has ``k + 1`` entries ``(beta_0, ..., beta_k)``. Parameter vectors are
ordered ``(rho, sigma, beta_0, ..., beta_k)`` throughout the package.

The likelihood deliberately omits the ``log|det(I - rho W)|`` term:
it is the Gaussian density of the residual ``y - X beta - rho W y``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import gammaln

LOG_2PI = np.log(2.0 * np.pi)
RCOND_MIN = 1e-12


class SingularSystemError(ArithmeticError):
    """``I - rho W`` is numerically singular."""


def _as_matrix(X, n):
    if X is None:
        return np.empty((n, 0))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


@dataclass(frozen=True)
class SarDataset:
    """Outcomes, covariates (without intercept) and weight matrix."""

    y: np.ndarray
    X: np.ndarray
    W: np.ndarray
    design: np.ndarray = field(init=False, repr=False, compare=False)
    Wy: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        n = y.size
        X = _as_matrix(self.X, n)
        W = np.asarray(self.W, dtype=float)
        if X.shape[0] != n:
            raise ValueError(f"X has {X.shape[0]} rows but y has length {n}")
        if W.shape != (n, n):
            raise ValueError(f"W has shape {W.shape}, expected ({n}, {n})")
        for name, arr in (("y", y), ("X", X), ("W", W)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "design", np.column_stack([np.ones(n), X]))
        object.__setattr__(self, "Wy", W @ y)

    @property
    def n(self):
        return self.y.size

    @property
    def k(self):
        return self.X.shape[1]

    def with_y(self, y):
        return SarDataset(y, self.X, self.W)


@dataclass(frozen=True)
class SarParams:
    rho: float
    sigma: float
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @classmethod
    def from_vector(cls, theta):
        theta = np.asarray(theta, dtype=float)
        return cls(float(theta[0]), float(theta[1]), theta[2:])

    def to_vector(self):
        return np.concatenate([[self.rho, self.sigma], self.beta])


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters: ``sigma^2 ~ IG(a, b)``, ``beta ~ N(0, eta I)``.

    ``eta`` is the prior *variance* of each coefficient.
    """

    a: float = 0.01
    b: float = 0.01
    eta: float = 100.0**2

    def __post_init__(self):
        for name in ("a", "b", "eta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"prior {name} must be positive")

    @classmethod
    def from_vector(cls, prior):
        """From ``(a, b, sqrt(eta))``, the prior standard deviation last."""
        a, b, sd = prior
        return cls(float(a), float(b), float(sd) ** 2)


def solve_spatial(W, rho, v):
    """Solve ``(I - rho W) x = v`` by LU with partial pivoting.

    Raises
    ------
    SingularSystemError
        If the reciprocal 1-norm condition estimate is below 1e-12.
    """
    W = np.asarray(W, dtype=float)
    M = np.eye(W.shape[0]) - rho * W
    anorm = np.abs(M).sum(axis=0).max()
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(M, check_finite=False)
    rcond, info = linalg.lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or not rcond >= RCOND_MIN:
        raise SingularSystemError(
            f"I - rho W is numerically singular at rho={rho!r} (rcond={rcond:.3g})"
        )
    return linalg.lu_solve((lu, piv), v, check_finite=False)


def sar_simulate(W, X, params, seed, return_noise=False):
    """Draw ``y = (I - rho W)^{-1} (X beta + eps)``.

    ``X`` excludes the intercept column. ``seed`` may be an int or a
    ``numpy.random.Generator``.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    design = np.column_stack([np.ones(n), _as_matrix(X, n)])
    if design.shape[1] != params.beta.size:
        raise ValueError(
            f"beta has {params.beta.size} entries for {design.shape[1]} design columns"
        )
    rng = np.random.default_rng(seed)
    eps = params.sigma * rng.standard_normal(n)
    y = solve_spatial(W, params.rho, design @ params.beta + eps)
    return (y, eps) if return_noise else y


def quantile(y, q):
    """Linear interpolation between order statistics."""
    return float(np.quantile(np.asarray(y, dtype=float), q, method="linear"))


def contaminate(y, position, level=0.99):
    """Shift one observation by an extreme sample quantile.

    ``position`` is 1-based. If ``y[0] > 0`` the upper ``level`` quantile is
    added, otherwise the lower ``1 - level`` quantile.
    """
    y = np.asarray(y, dtype=float)
    if not 1 <= position <= y.size:
        raise IndexError(f"position {position} outside [1, {y.size}]")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    q = level if y[0] > 0 else 1.0 - level
    z = y.copy()
    z[position - 1] = y[position - 1] + quantile(y, q)
    return z


def residuals(data, params):
    return data.y - data.design @ params.beta - params.rho * data.Wy


def log_likelihood(data, params):
    r = residuals(data, params)
    s2 = params.sigma**2
    return -0.5 * data.n * (LOG_2PI + np.log(s2)) - (r @ r) / (2.0 * s2)


def pointwise_log_likelihood(data, params):
    """Per-observation Gaussian log-densities; they sum to the log-likelihood."""
    r = residuals(data, params)
    s2 = params.sigma**2
    return -0.5 * (LOG_2PI + np.log(s2)) - r**2 / (2.0 * s2)


def pointwise_log_likelihood_draws(data, values):
    """``(S, n)`` matrix of pointwise log-likelihoods, one row per draw."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    rho, sigma, beta = values[:, :1], values[:, 1:2], values[:, 2:]
    r = data.y[None, :] - beta @ data.design.T - rho * data.Wy[None, :]
    return -0.5 * (LOG_2PI + 2.0 * np.log(sigma)) - r**2 / (2.0 * sigma**2)


def log_prior(params, prior):
    """``U(-1, 1)`` on rho, ``N(0, eta I)`` on beta, ``IG(a, b)`` on sigma^2."""
    if not -1.0 < params.rho < 1.0:
        return -np.inf
    beta = params.beta
    s2 = params.sigma**2
    lp_rho = -np.log(2.0)
    lp_beta = -0.5 * beta.size * (LOG_2PI + np.log(prior.eta)) - (beta @ beta) / (2.0 * prior.eta)
    lp_s2 = (
        prior.a * np.log(prior.b)
        - gammaln(prior.a)
        - (prior.a + 1.0) * np.log(s2)
        - prior.b / s2
    )
    return lp_rho + lp_beta + lp_s2


def log_posterior_kernel(data, params, prior):
    """Unnormalized log posterior of ``(rho, beta, sigma^2)``."""
    return log_likelihood(data, params) + log_prior(params, prior)


def log_posterior_kernel_draws(data, values, prior):
    """Vectorized :func:`log_posterior_kernel` over rows of ``values``.

    Rows with ``rho`` outside ``(-1, 1)`` or ``sigma <= 0`` give ``-inf``.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    rho, sigma, beta = values[:, 0], values[:, 1], values[:, 2:]
    ok = (np.abs(rho) < 1.0) & (sigma > 0)
    sig = np.where(ok, sigma, 1.0)
    s2 = sig**2
    r = data.y[None, :] - beta @ data.design.T - rho[:, None] * data.Wy[None, :]
    ll = -0.5 * data.n * (LOG_2PI + np.log(s2)) - np.einsum("ij,ij->i", r, r) / (2.0 * s2)
    lp = (
        -np.log(2.0)
        - 0.5 * beta.shape[1] * (LOG_2PI + np.log(prior.eta))
        - np.einsum("ij,ij->i", beta, beta) / (2.0 * prior.eta)
        + prior.a * np.log(prior.b)
        - gammaln(prior.a)
        - (prior.a + 1.0) * np.log(s2)
        - prior.b / s2
    )
    return np.where(ok, ll + lp, -np.inf)


def fitted_values(data, params):
    """Reduced-form mean ``(I - rho W)^{-1} X beta``."""
    return solve_spatial(data.W, params.rho, data.design @ params.beta)


def structural_fitted_values(data, params):
    """One-step fitted values ``X beta + rho W y``.

    Entry ``i`` uses only the neighbours of ``i`` (``w_ii = 0``), never
    ``y_i`` itself.
    """
    return data.design @ params.beta + params.rho * data.Wy


def impute_yhat(data, draws, method="mean", form="structural"):
    """Aggregate per-draw fitted values into one imputation vector.

    Parameters
    ----------
    method : {"mean", "median", 1, 2}
        Element-wise aggregate across draws.
    form : {"structural", "reduced"}
        ``"structural"`` uses ``X beta + rho W y``; ``"reduced"`` uses
        :func:`fitted_values`. The reduced form is unstable when rho draws
        approach 1, since ``(I - rho W)^{-1}`` scales the mean by about
        ``1 / (1 - rho)``.
    """
    method = {1: "mean", 2: "median"}.get(method, method)
    if method not in ("mean", "median"):
        raise ValueError(f"unknown imputation method {method!r}")
    if form not in ("structural", "reduced"):
        raise ValueError(f"unknown fitted-value form {form!r}")
    values = np.atleast_2d(np.asarray(getattr(draws, "values", draws), dtype=float))
    if values.shape[0] == 0:
        raise ValueError("no posterior draws")
    if form == "structural":
        fits = values[:, 2:] @ data.design.T + values[:, :1] * data.Wy[None, :]
    else:
        fits = np.empty((values.shape[0], data.n))
        for s, theta in enumerate(values):
            fits[s] = fitted_values(data, SarParams.from_vector(theta))
    return fits.mean(axis=0) if method == "mean" else np.median(fits, axis=0)
