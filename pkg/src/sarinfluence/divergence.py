"""Bregman divergences between full and imputation-perturbed posteriors.

For each observation ``i`` the full posterior ``f1`` (given ``y``) is compared
with ``f2`` (given ``y`` with ``y_i`` replaced by an imputed value). Both
densities are evaluated at draws from ``f1``:

* ``f1 = k1 / c1`` where ``c1`` comes from a reciprocal importance estimate
  using a moment-matched auxiliary density;
* ``f2 = k2 / c2`` with ``c2 = c1 * mean(k2 / k1)`` over the same draws.

The divergence integral is estimated by averaging ``integrand / f1`` over
the draws, and those per-draw terms form the ``(S, n)`` matrix used for
supreme proportions.

Densities are over the draw coordinates ``(rho, sigma, beta_0, ..., beta_k)``
with Lebesgue measure.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from sarinfluence.model import log_posterior_kernel_draws

TINY = np.finfo(float).tiny

DIST_CODES = {1: "exponential", 2: "gamma", 3: "normal", 4: "mvn"}


class DivergenceError(ArithmeticError):
    pass


def _check_positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("psi is defined for x > 0 only")
    return x


def psi(x, alpha):
    """Convex generator of the alpha family; zero with zero slope at ``x = 1``."""
    x = _check_positive(x)
    if alpha == 2:
        return (x * x - 2.0 * x + 1.0) / 2.0
    if alpha == 1:
        return x * np.log(x) - x + 1.0
    if alpha == 0:
        return -np.log(x) + x - 1.0
    # expm1 forms anchored at the nearer of the removable points 0 and 1
    log_x = np.log(x)
    if abs(alpha - 1.0) < abs(alpha):
        num = x * np.expm1((alpha - 1.0) * log_x) - (alpha - 1.0) * (x - 1.0)
    else:
        num = np.expm1(alpha * log_x) - alpha * (x - 1.0)
    return num / (alpha * (alpha - 1.0))


def psi_prime(x, alpha):
    x = _check_positive(x)
    if alpha == 2:
        return x - 1.0
    if alpha == 1:
        return np.log(x)
    if alpha == 0:
        return 1.0 - 1.0 / x
    return np.expm1((alpha - 1.0) * np.log(x)) / (alpha - 1.0)


def _log_mean_exp(a, axis=0):
    m = np.max(a, axis=axis, keepdims=True)
    if np.any(np.isneginf(m)):
        raise DivergenceError("all terms of a log-mean-exp are zero")
    return np.squeeze(m, axis=axis) + np.log(np.mean(np.exp(a - m), axis=axis))


# --- coordinate transforms -------------------------------------------------

SUPPORT_KINDS = ("real", "positive", "unit")


def _unconstrain(theta, support):
    u = np.array(theta, dtype=float)
    log_jac = np.zeros(u.shape[0])
    for j, kind in enumerate(support):
        col = theta[:, j]
        if kind == "positive":
            u[:, j] = np.log(col)
            log_jac -= np.log(col)
        elif kind == "unit":
            u[:, j] = np.arctanh(col)
            log_jac -= np.log1p(-col * col)
        elif kind != "real":
            raise ValueError(f"unknown support kind {kind!r}")
    return u, log_jac


def sar_support(n_params):
    return ("unit", "positive") + ("real",) * (n_params - 2)


@dataclass(frozen=True)
class AuxiliaryDensity:
    """Moment-matched auxiliary density for the normalizing-constant estimate.

    Draws are first mapped to unconstrained coordinates ``u`` (``atanh`` for
    ``"unit"`` coordinates, ``log`` for ``"positive"``). Normal and MVN fit
    the mean and covariance of ``u``; Exponential and Gamma fit component-wise
    moments of ``exp(u)``. :meth:`log_density` returns the log density in the
    original coordinates, Jacobian included.
    """

    kind: str
    support: tuple
    params: dict = field(repr=False)

    @classmethod
    def fit(cls, kind, draws, support=None):
        kind = DIST_CODES.get(kind, kind)
        if kind not in DIST_CODES.values():
            raise ValueError(f"unknown auxiliary distribution {kind!r}")
        theta = np.asarray(getattr(draws, "values", draws), dtype=float)
        if theta.ndim == 1:
            theta = theta[:, None]
        support = tuple(support) if support is not None else sar_support(theta.shape[1])
        u, _ = _unconstrain(theta, support)
        if kind == "normal":
            params = {"mean": u.mean(axis=0), "sd": u.std(axis=0, ddof=1)}
            if np.any(params["sd"] <= 0):
                raise DivergenceError("degenerate draws: zero variance coordinate")
        elif kind == "mvn":
            mean = u.mean(axis=0)
            cov = np.atleast_2d(np.cov(u, rowvar=False))
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise DivergenceError("draw covariance is not positive definite") from exc
            params = {"mean": mean, "chol": chol}
        else:
            p = np.exp(u)
            m, v = p.mean(axis=0), p.var(axis=0, ddof=1)
            if kind == "exponential":
                params = {"rate": 1.0 / m}
            else:
                if np.any(v <= 0):
                    raise DivergenceError("degenerate draws: zero variance coordinate")
                params = {"shape": m * m / v, "rate": m / v}
        return cls(kind, support, params)

    def log_density_unconstrained(self, u):
        u = np.atleast_2d(u)
        p = self.params
        if self.kind == "normal":
            z = (u - p["mean"]) / p["sd"]
            return np.sum(-0.5 * z * z - np.log(p["sd"]) - 0.5 * np.log(2 * np.pi), axis=1)
        if self.kind == "mvn":
            d = u.shape[1]
            z = np.linalg.solve(p["chol"], (u - p["mean"]).T)
            log_det = np.sum(np.log(np.diag(p["chol"])))
            return -0.5 * np.sum(z * z, axis=0) - log_det - 0.5 * d * np.log(2 * np.pi)
        # densities of exp(u) pulled back to u: extra Jacobian sum(u)
        x = np.exp(u)
        rate = p["rate"]
        if self.kind == "exponential":
            return np.sum(np.log(rate) - rate * x + u, axis=1)
        shape = p["shape"]
        return np.sum(shape * np.log(rate) - gammaln(shape) + shape * u - rate * x, axis=1)

    def log_density(self, theta):
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            u, log_jac = _unconstrain(theta, self.support)
            out = self.log_density_unconstrained(u) + log_jac
        return np.where(np.isnan(out), -np.inf, out)


def _as_aux(aux, draws, support=None):
    if isinstance(aux, AuxiliaryDensity):
        return aux
    return AuxiliaryDensity.fit(aux, draws, support)


def log_normalizer(draws, log_kernel, aux, log_sampling_kernel=None):
    """Reciprocal importance estimate of ``log c``, ``c = integral of exp(log_kernel)``.

    Parameters
    ----------
    draws : (S, d) array or PosteriorDraws
        Draws from the density proportional to ``exp(log_sampling_kernel)``;
        by default that is ``log_kernel`` itself.
    log_kernel, log_sampling_kernel : callable or array
        Vectorized over rows of ``draws``, or precomputed length-S values.
    aux : AuxiliaryDensity

    Notes
    -----
    With draws from ``k_s / c_s``::

        c = E[k / k_s] / E[g / k_s]

    which reduces to ``1 / c = E[g / k]`` when ``k_s = k``.
    """
    theta = np.asarray(getattr(draws, "values", draws), dtype=float)
    if theta.ndim == 1:
        theta = theta[:, None]
    if theta.shape[0] == 0:
        raise ValueError("no draws")
    lk = np.asarray(log_kernel(theta) if callable(log_kernel) else log_kernel, dtype=float)
    if log_sampling_kernel is None:
        lks = lk
    else:
        lks = np.asarray(
            log_sampling_kernel(theta) if callable(log_sampling_kernel) else log_sampling_kernel,
            dtype=float,
        )
    lg = aux.log_density(theta)
    if not np.all(np.isfinite(lk)) or not np.all(np.isfinite(lks)):
        raise DivergenceError("non-finite kernel value at a draw")
    if np.all(np.isneginf(lg)):
        raise DivergenceError("auxiliary density is zero at every draw")
    log_ratio = 0.0 if log_sampling_kernel is None else _log_mean_exp(lk - lks)
    return float(log_ratio - _log_mean_exp(lg - lks))


# --- estimators on kernel values ------------------------------------------

def _densities(log_k1, log_k2, log_g):
    """Log densities ``log f1`` (S,) and ``log f2`` (S, n) at the draws."""
    if not np.all(np.isfinite(log_k1)) or not np.all(np.isfinite(log_k2)):
        raise DivergenceError(
            "non-finite posterior density at a draw; prior hyperparameters a and b "
            "below 0.01 are a common cause"
        )
    if np.all(np.isneginf(log_g)):
        raise DivergenceError("auxiliary density is zero at every draw")
    log_c1 = -_log_mean_exp(log_g - log_k1)
    log_c2 = log_c1 + _log_mean_exp(log_k2 - log_k1[:, None], axis=0)
    return log_k1 - log_c1, log_k2 - log_c2[None, :]


def _exp_clamped(log_f, flags):
    with np.errstate(over="ignore", under="ignore"):
        f = np.exp(log_f)
    if not np.all(np.isfinite(f)):
        raise DivergenceError("density overflow at a draw")
    low = f < TINY
    if np.any(low):
        flags["underflow_clamped"] = flags.get("underflow_clamped", 0) + int(low.sum())
        f = np.where(low, TINY, f)
    return f


def bregman_terms(log_k1, log_k2, log_g, alpha, flags=None):
    """Per-draw Bregman terms ``[psi(f1) - psi(f2) - (f1 - f2) psi'(f2)] / f1``.

    ``log_k1`` has shape (S,), ``log_k2`` (S, n); ``log_g`` is the auxiliary
    log density at the draws.
    """
    flags = {} if flags is None else flags
    log_k1 = np.asarray(log_k1, dtype=float)
    log_k2 = np.asarray(log_k2, dtype=float).reshape(log_k1.size, -1)
    lf1, lf2 = _densities(log_k1, log_k2, np.asarray(log_g, dtype=float))
    f1 = _exp_clamped(lf1, flags)[:, None]
    f2 = _exp_clamped(lf2, flags)
    with np.errstate(over="ignore", invalid="ignore"):
        terms = (psi(f1, alpha) - psi(f2, alpha) - (f1 - f2) * psi_prime(f2, alpha)) / f1
    if not np.all(np.isfinite(terms)):
        raise DivergenceError(f"non-finite divergence term at alpha={alpha}")
    return terms


def itakura_saito_terms(log_k1, log_k2, log_g, flags=None):
    """Per-draw ``[log(f2/f1) + f1/f2 - 1] / f1``, ratios taken in log space."""
    flags = {} if flags is None else flags
    log_k1 = np.asarray(log_k1, dtype=float)
    log_k2 = np.asarray(log_k2, dtype=float).reshape(log_k1.size, -1)
    lf1, lf2 = _densities(log_k1, log_k2, np.asarray(log_g, dtype=float))
    log_ratio = lf1[:, None] - lf2
    with np.errstate(over="ignore"):
        integrand = -log_ratio + np.expm1(log_ratio)
        terms = integrand / _exp_clamped(lf1, flags)[:, None]
    if not np.all(np.isfinite(terms)):
        raise DivergenceError("non-finite Itakura-Saito term")
    return terms


def kl_terms(log_ratio):
    """Per-draw KL terms from ``log k1 - log k2`` (S, n).

    ``Delta + log mean_t exp(-Delta_t)``; the second part estimates the log
    ratio of normalizing constants, so no auxiliary density is needed.
    """
    delta = np.asarray(log_ratio, dtype=float)
    if delta.ndim == 1:
        delta = delta[:, None]
    if not np.all(np.isfinite(delta)):
        raise DivergenceError("non-finite likelihood at a draw")
    return delta + _log_mean_exp(-delta, axis=0)[None, :]


def supreme_proportion(per_draw):
    """Share of draws in which each column holds the row maximum.

    Ties go to the lowest column index, so the proportions sum to one.
    """
    D = np.atleast_2d(np.asarray(per_draw, dtype=float))
    if D.size == 0:
        raise ValueError("empty divergence matrix")
    counts = np.bincount(np.argmax(D, axis=1), minlength=D.shape[1])
    return counts / D.shape[0]


@dataclass
class DivergenceReport:
    measure: str
    alpha: float
    type: int
    per_obs: np.ndarray
    per_draw: np.ndarray = field(repr=False)
    flags: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "measure": self.measure,
            "alpha": self.alpha,
            "type": self.type,
            "per_obs": self.per_obs.tolist(),
            "flags": dict(self.flags),
            **self.meta,
        }


def make_report(measure, alpha, type, per_draw, flags=None, meta=None):
    if type not in (1, 2):
        raise ValueError(f"type must be 1 or 2, got {type}")
    per_obs = per_draw.mean(axis=0) if type == 1 else supreme_proportion(per_draw)
    return DivergenceReport(measure, alpha, type, per_obs, per_draw, flags or {}, meta or {})


# --- SAR wrappers ----------------------------------------------------------

def _draw_matrix(theta):
    values = np.atleast_2d(np.asarray(getattr(theta, "values", theta), dtype=float))
    if values.shape[0] == 0:
        raise ValueError("no posterior draws")
    return values


def _check_yhat(data, yhat):
    yhat = np.asarray(yhat, dtype=float).ravel()
    if yhat.size != data.n:
        raise ValueError(f"yhat has length {yhat.size}, expected {data.n}")
    return yhat


def imputation_log_ratio(data, yhat, values):
    """``log L(y | theta) - log L(y_(i) | theta)`` for every draw and ``i``.

    ``y_(i)`` is ``y`` with entry ``i`` replaced by ``yhat[i]``; the change
    also enters through ``W y``.
    """
    rho = values[:, :1]
    s2 = values[:, 1:2] ** 2
    beta = values[:, 2:]
    r = data.y[None, :] - beta @ data.design.T - rho * data.Wy[None, :]
    rw = r @ data.W
    col_sq = np.sum(data.W**2, axis=0)
    delta = (yhat - data.y)[None, :]
    d_rss = 2.0 * delta * (r - rho * rw) + delta**2 * (1.0 + rho**2 * col_sq[None, :])
    return d_rss / (2.0 * s2)


def sar_log_kernel(data, values, prior):
    """Unnormalized log posterior over ``(rho, sigma, beta)``."""
    return log_posterior_kernel_draws(data, values, prior) + np.log(2.0 * values[:, 1])


def _sar_inputs(data, yhat, theta, prior, aux):
    values = _draw_matrix(theta)
    yhat = _check_yhat(data, yhat)
    log_k1 = sar_log_kernel(data, values, prior)
    log_k2 = log_k1[:, None] - imputation_log_ratio(data, yhat, values)
    aux = _as_aux(aux, values)
    return log_k1, log_k2, aux.log_density(values), aux


def bregman_divergence(data, yhat, theta, prior, aux, alpha, type=1):
    """Bregman divergence for ``alpha`` outside {0, 1}.

    ``aux`` is an :class:`AuxiliaryDensity` or a distribution code 1-4 /
    name fitted to ``theta``.
    """
    if alpha in (0, 1):
        raise ValueError(
            f"alpha={alpha} is handled by "
            + ("kl_divergence" if alpha == 1 else "is_divergence")
        )
    log_k1, log_k2, log_g, aux = _sar_inputs(data, yhat, theta, prior, aux)
    flags = {}
    terms = bregman_terms(log_k1, log_k2, log_g, alpha, flags)
    return make_report("bregman", float(alpha), type, terms, flags, {"dist": aux.kind})


def is_divergence(data, yhat, theta, prior, aux, type=1):
    log_k1, log_k2, log_g, aux = _sar_inputs(data, yhat, theta, prior, aux)
    flags = {}
    terms = itakura_saito_terms(log_k1, log_k2, log_g, flags)
    return make_report("is", 0.0, type, terms, flags, {"dist": aux.kind})


def kl_divergence(data, yhat, theta, type=1):
    values = _draw_matrix(theta)
    yhat = _check_yhat(data, yhat)
    terms = kl_terms(imputation_log_ratio(data, yhat, values))
    return make_report("kl", 1.0, type, terms)
