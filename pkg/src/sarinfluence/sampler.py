"""Adaptive random-walk Metropolis for the SAR posterior, plus R-hat/ESS.

Chains run on the unconstrained space ``(atanh rho, log sigma, beta)``.
The proposal covariance and scale adapt during burn-in only and are frozen
for the retained half, so the retained draws come from a fixed Markov kernel.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

TARGET_ACCEPT = 0.234
MAX_INIT_TRIES = 100


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class PosteriorDraws:
    """Retained draws, rows ordered chain by chain.

    ``values`` has columns ``(rho, sigma, beta_0, ..., beta_k)``;
    ``accept_rates`` holds the post-adaptation rate of each chain when known.
    """

    values: np.ndarray
    chain_ids: np.ndarray
    seed: int = 0
    names: tuple = field(default=())
    accept_rates: tuple = field(default=(), compare=False)

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        chain_ids = np.asarray(self.chain_ids, dtype=int).ravel()
        if chain_ids.size != values.shape[0]:
            raise ValueError("chain_ids length differs from number of draws")
        counts = np.unique(chain_ids, return_counts=True)[1]
        if counts.size and np.any(counts != counts[0]):
            raise ValueError("chains have unequal numbers of draws")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "chain_ids", chain_ids)
        if not self.names:
            object.__setattr__(self, "names", parameter_names(values.shape[1] - 3))

    @property
    def n_draws(self):
        return self.values.shape[0]

    @property
    def n_chains(self):
        return np.unique(self.chain_ids).size

    def __len__(self):
        return self.n_draws


def parameter_names(k):
    return ("rho", "sigma") + tuple(f"beta{j}" for j in range(k + 1))


def to_unconstrained(values):
    values = np.asarray(values, dtype=float)
    u = values.copy()
    u[..., 0] = np.arctanh(values[..., 0])
    u[..., 1] = np.log(values[..., 1])
    return u


def to_constrained(u):
    u = np.asarray(u, dtype=float)
    values = u.copy()
    values[..., 0] = np.tanh(u[..., 0])
    values[..., 1] = np.exp(u[..., 1])
    return values


def _log1m_tanh2(v):
    # log(1 - tanh(v)^2) without cancellation for large |v|
    a = np.abs(v)
    return np.log(4.0) - 2.0 * a - 2.0 * np.log1p(np.exp(-2.0 * a))


class SarTarget:
    """Log posterior on ``(atanh rho, log sigma, beta)`` with its log-Jacobian.

    The posterior is over ``(rho, beta, sigma^2)``, hence the Jacobian
    ``(1 - rho^2) * 2 sigma^2``.
    """

    def __init__(self, data, prior):
        self.y = data.y
        self.Wy = data.Wy
        self.design = data.design
        self.n = data.n
        self.a = prior.a
        self.b = prior.b
        self.eta = prior.eta

    def __call__(self, u):
        rho = np.tanh(u[0])
        if not -1.0 < rho < 1.0:
            return -np.inf
        log_s2 = 2.0 * u[1]
        s2 = np.exp(log_s2)
        beta = u[2:]
        r = self.y - self.design @ beta - rho * self.Wy
        return (
            -0.5 * self.n * log_s2
            - (r @ r) / (2.0 * s2)
            - (beta @ beta) / (2.0 * self.eta)
            - (self.a + 1.0) * log_s2
            - self.b / s2
            + _log1m_tanh2(u[0])
            + log_s2
        )


def rwm_chain(log_target, x0, n_iter, rng, n_adapt=None, target_accept=TARGET_ACCEPT):
    """One adaptive random-walk Metropolis chain.

    During the first ``n_adapt`` iterations (default ``n_iter // 2``) a
    Robbins-Monro update steers the global proposal scale towards
    ``target_accept`` and the proposal covariance tracks the running sample
    covariance. The covariance estimate restarts once, a quarter of the way
    into adaptation, to forget the transient from the starting point.

    Returns
    -------
    samples : (n_iter, d) array
    accept_rate : float
        Acceptance rate after adaptation stopped.
    """
    x = np.array(x0, dtype=float)
    d = x.size
    n_adapt = n_iter // 2 if n_adapt is None else n_adapt
    restart = n_adapt // 4
    lp = log_target(x)
    if not np.isfinite(lp):
        raise SamplerError("initial state has non-finite log density")

    z = rng.standard_normal((n_iter, d))
    log_u = np.log(rng.random(n_iter))

    log_scale = np.log(2.38**2 / d)
    cov = np.eye(d) * 0.01
    chol = np.linalg.cholesky(np.exp(log_scale) * cov)
    mean = x.copy()
    m2 = np.zeros((d, d))
    count = 0

    out = np.empty((n_iter, d))
    accepted = 0
    for t in range(n_iter):
        prop = x + chol @ z[t]
        lp_prop = log_target(prop)
        log_ratio = lp_prop - lp if np.isfinite(lp_prop) else -np.inf
        accept = log_ratio > log_u[t]
        if accept:
            x, lp = prop, lp_prop
        out[t] = x
        if t >= n_adapt:
            accepted += accept
            continue
        if t == restart:
            mean, m2, count = x.copy(), np.zeros((d, d)), 0
        count += 1
        delta = x - mean
        mean += delta / count
        m2 += np.outer(delta, x - mean)
        log_scale += (np.exp(min(0.0, log_ratio)) - target_accept) / (t + 1) ** 0.6
        if count > 10 * d and (t + 1) % 20 == 0:
            cov = m2 / (count - 1) + 1e-10 * np.eye(d)
        chol = linalg.cholesky(np.exp(log_scale) * cov, lower=True)
    n_kept = n_iter - n_adapt
    return out, (float(accepted / n_kept) if n_kept else float("nan"))


def _initial_state(log_target, init, rng):
    for _ in range(MAX_INIT_TRIES):
        x0 = init(rng)
        if np.isfinite(log_target(x0)):
            return x0
    raise SamplerError(
        f"non-finite log density at initialization after {MAX_INIT_TRIES} tries; "
        "check the data and prior hyperparameters"
    )


def _run_one(args):
    log_target, init, n_iter, seq = args
    rng = np.random.default_rng(seq)
    x0 = _initial_state(log_target, init, rng)
    samples, rate = rwm_chain(log_target, x0, n_iter, rng)
    return samples[n_iter // 2:], rate


def sample_chains(log_target, init, n_chains, n_iter, seed, threads=1):
    """Run independent chains and drop the first half of each.

    ``init(rng)`` proposes a starting point. Each chain gets its own
    ``SeedSequence`` child so results do not depend on ``threads``.

    Returns
    -------
    samples : (n_chains * n_iter // 2, d) array
    chain_ids : array of int
    accept_rates : list of float
    """
    if n_iter < 2 or n_iter % 2:
        raise ValueError(f"n_iter must be even, got {n_iter}")
    children = np.random.SeedSequence(seed).spawn(n_chains)
    jobs = [(log_target, init, n_iter, child) for child in children]
    if threads > 1 and n_chains > 1:
        with ProcessPoolExecutor(max_workers=min(threads, n_chains)) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    samples = np.concatenate([r[0] for r in results])
    chain_ids = np.repeat(np.arange(n_chains), n_iter // 2)
    return samples, chain_ids, [r[1] for r in results]


class _SarInit:
    def __init__(self, data):
        self.data = data
        self.sd = max(float(np.std(data.y)), 1e-3)

    def __call__(self, rng):
        d = self.data
        rho = rng.uniform(-0.5, 0.5)
        beta, *_ = np.linalg.lstsq(d.design, d.y - rho * d.Wy, rcond=None)
        beta = beta + 0.1 * rng.standard_normal(beta.size)
        log_sigma = np.log(self.sd) + rng.uniform(-0.5, 0.5)
        return np.concatenate([[np.arctanh(rho), log_sigma], beta])


def fit(data, prior, n_chains=2, n_iter=10000, seed=0, threads=1):
    """Sample the SAR posterior.

    Parameters
    ----------
    data : SarDataset
    prior : PriorConfig
    n_chains : int
        Between 2 and 4.
    n_iter : int
        Iterations per chain, even and at least 200; half are burn-in.
    seed : int

    Returns
    -------
    PosteriorDraws
    """
    if n_chains not in (2, 3, 4):
        raise ValueError(f"n_chains must be 2, 3 or 4, got {n_chains}")
    if n_iter < 200 or n_iter % 2:
        raise ValueError(f"n_iter must be even and >= 200, got {n_iter}")
    u, chain_ids, rates = sample_chains(
        SarTarget(data, prior), _SarInit(data), n_chains, n_iter, seed, threads
    )
    return PosteriorDraws(to_constrained(u), chain_ids, seed=seed, accept_rates=tuple(rates))


def _by_chain(column, chain_ids):
    column = np.asarray(column, dtype=float).ravel()
    chain_ids = np.asarray(chain_ids).ravel()
    labels = np.unique(chain_ids)
    return np.stack([column[chain_ids == c] for c in labels])


def rhat(column, chain_ids):
    """Split-chain potential scale reduction factor.

    Constant draws give 1; chains that are each constant at different
    values give ``inf``.
    """
    chains = _by_chain(column, chain_ids)
    m, n = chains.shape
    if m < 2 or n < 4:
        raise ValueError("rhat needs at least 2 chains of at least 4 draws")
    half = n // 2
    split = np.vstack([chains[:, :half], chains[:, n - half:]])
    means = split.mean(axis=1)
    w = split.var(axis=1, ddof=1).mean()
    b = half * means.var(ddof=1)
    if w == 0:
        return 1.0 if b == 0 else np.inf
    var_plus = (half - 1) / half * w + b / half
    return float(np.sqrt(var_plus / w))


def _autocov(x):
    n = x.size
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    return np.fft.irfft(f * np.conj(f), size)[:n] / n


def ess(column, chain_ids):
    """Effective sample size with Geyer's initial positive sequence.

    Autocorrelations are combined across chains; the result is capped at
    the total number of draws.
    """
    chains = _by_chain(column, chain_ids)
    m, n = chains.shape
    total = m * n
    if n < 4:
        raise ValueError("ess needs at least 4 draws per chain")
    acov = np.stack([_autocov(c) for c in chains])
    chain_var = acov[:, 0] * n / (n - 1)
    w = chain_var.mean()
    var_plus = w * (n - 1) / n
    if m > 1:
        var_plus += chains.mean(axis=1).var(ddof=1)
    if var_plus <= 0:
        return float(total)
    rho_t = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho_t[0] = 1.0
    tau = -1.0
    for t in range(0, n - 1, 2):
        pair = rho_t[t] + rho_t[t + 1]
        if pair < 0:
            break
        tau += 2.0 * pair
    return float(min(total / max(tau, 1e-12), total))


def summarize(draws, probs=(0.025, 0.5, 0.975)):
    """Table-style summary: mean, quantiles, ESS and split R-hat per parameter.

    Returns a list of dicts with keys ``parameter, mean, q2.5, q50, q97.5,
    ess, rhat``. R-hat is ``nan`` for single-chain draws.
    """
    values = np.atleast_2d(np.asarray(draws.values, dtype=float))
    rows = []
    for j, name in enumerate(draws.names):
        col = values[:, j]
        q = np.quantile(col, probs, method="linear")
        multi = draws.n_chains >= 2 and values.shape[0] // draws.n_chains >= 4
        rows.append(
            {
                "parameter": name,
                "mean": float(col.mean()),
                "q2.5": float(q[0]),
                "q50": float(q[1]),
                "q97.5": float(q[2]),
                "ess": ess(col, draws.chain_ids) if col.size // draws.n_chains >= 4 else float(col.size),
                "rhat": rhat(col, draws.chain_ids) if multi else float("nan"),
            }
        )
    return rows
