"""WAIC and importance-sampling LOO-CV from pointwise log-likelihoods.

Inputs are ``(S, n)`` matrices with entry ``(s, i) = log p(y_i | theta^s)``.
Both criteria are on the deviance scale (smaller is better).
"""

from dataclasses import asdict, dataclass

import numpy as np


class CriteriaError(ValueError):
    pass


def _check(ll):
    ll = np.asarray(ll, dtype=float)
    if ll.ndim == 1:
        ll = ll[:, None]
    if ll.ndim != 2:
        raise CriteriaError(f"log-likelihood matrix must be 2-D, got shape {ll.shape}")
    if ll.shape[0] < 2:
        raise CriteriaError("at least two posterior draws are required")
    if not np.all(np.isfinite(ll)):
        raise CriteriaError("log-likelihood matrix has non-finite entries")
    return ll


def _log_sum_exp(a, axis=0):
    m = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def _log_mean_exp(a, axis=0):
    m = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.mean(np.exp(a - m), axis=axis))


def _scaled_se(contrib):
    n = contrib.size
    return float(np.sqrt(n * contrib.var(ddof=1))) if n > 1 else 0.0


def waic_pointwise(ll):
    """Per-observation ``lppd_i`` and posterior variances of ``log p(y_i | theta)``."""
    ll = _check(ll)
    return _log_mean_exp(ll, axis=0), ll.var(axis=0, ddof=1)


def waic(ll):
    """Watanabe-Akaike information criterion.

    Returns
    -------
    (waic, waic_se, p_waic)
    """
    lppd, var = waic_pointwise(ll)
    p_waic = float(var.sum())
    value = float(-2.0 * lppd.sum() + 2.0 * p_waic)
    return value, _scaled_se(-2.0 * (lppd - var)), p_waic


def loo_log_weights(ll):
    """Normalized log importance weights approximating leave-one-out posteriors.

    Column ``i`` holds ``log wbar_{s,i}`` with raw weights
    ``1 / p(y_i | theta^s)`` truncated at ``mean * S**0.75``.
    """
    ll = _check(ll)
    S = ll.shape[0]
    log_raw = -ll
    cap = _log_mean_exp(log_raw, axis=0) + 0.75 * np.log(S)
    log_w = np.minimum(log_raw, cap[None, :])
    return log_w - _log_sum_exp(log_w, axis=0)[None, :]


def loo_cv(ll):
    """Leave-one-out criterion with an averaged cross term.

    With ``L_ij = log sum_s wbar_{s,i} p(y_j | theta^s)``::

        loo = -2 sum_i L_ii + (2 / n) sum_i sum_j L_ij

    Returns
    -------
    (loo, loo_se)
    """
    ll = _check(ll)
    n = ll.shape[1]
    log_w = loo_log_weights(ll)
    if not np.all(np.isfinite(log_w)):
        raise CriteriaError("importance weights vanished after truncation")
    L = np.empty((n, n))
    for i in range(n):
        L[i] = _log_sum_exp(log_w[:, i:i + 1] + ll, axis=0)
    own = np.diag(L).copy()
    term1 = -2.0 * own.sum()
    term2 = 2.0 / n * L.sum()
    return float(term1 + term2), _scaled_se(-2.0 * own)


@dataclass(frozen=True)
class ComparisonEntry:
    model: str
    waic: float
    waic_se: float
    p_waic: float
    loo: float
    loo_se: float

    @classmethod
    def from_loglik(cls, model, ll):
        w, w_se, p = waic(ll)
        l, l_se = loo_cv(ll)
        return cls(model, w, w_se, p, l, l_se)

    def as_dict(self):
        return asdict(self)


def compare(entries):
    """Sort models by LOO (stable) and build tidy plot rows.

    Returns
    -------
    table : list of ComparisonEntry
        Ascending LOO; ties keep input order.
    tidy : list of dict
        Rows ``{model, criterion, estimate, se}``, two per model, in input order.
    """
    entries = list(entries)
    if len(entries) < 2:
        raise CriteriaError("model comparison needs at least two models")
    table = sorted(entries, key=lambda e: e.loo)
    tidy = []
    for e in entries:
        tidy.append({"model": e.model, "criterion": "WAIC", "estimate": e.waic, "se": e.waic_se})
        tidy.append({"model": e.model, "criterion": "LOO", "estimate": e.loo, "se": e.loo_se})
    return table, tidy
