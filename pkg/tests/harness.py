"""One-parameter normal-mean models with exactly known posteriors.

``GaussianHarness``: y_j ~ N(mu, s^2), mu ~ N(0, tau^2); posterior normal.
``BoundedHarness``: same likelihood, mu ~ U(-1, 1); posterior truncated normal.

Each exposes exact posterior draws, unnormalized log kernels for the full
data and for every single-entry imputation, and exact normalized densities
for quadrature oracles.
"""

import numpy as np
from scipy import integrate, stats


class GaussianHarness:
    lower, upper = -np.inf, np.inf

    def __init__(self, y, yhat, s=1.0, tau=10.0):
        self.y = np.asarray(y, dtype=float)
        self.yhat = np.asarray(yhat, dtype=float)
        self.s = s
        self.tau = tau

    @property
    def n(self):
        return self.y.size

    def data_i(self, i):
        v = self.y.copy()
        v[i] = self.yhat[i]
        return v

    def _post(self, v):
        prec = v.size / self.s**2 + 1.0 / self.tau**2
        return (v.sum() / self.s**2) / prec, 1.0 / np.sqrt(prec)

    def density(self, v):
        m, sd = self._post(v)
        return stats.norm(m, sd)

    def log_prior(self, mu):
        return stats.norm.logpdf(mu, 0.0, self.tau)

    def log_kernel(self, mu, v):
        mu = np.asarray(mu, dtype=float).ravel()
        ll = stats.norm.logpdf(v[None, :], mu[:, None], self.s).sum(axis=1)
        return ll + self.log_prior(mu)

    def draws(self, S, seed):
        return self.density(self.y).rvs(size=S, random_state=seed).reshape(-1, 1)

    def kernels(self, theta):
        log_k1 = self.log_kernel(theta, self.y)
        log_k2 = np.column_stack([self.log_kernel(theta, self.data_i(i)) for i in range(self.n)])
        return log_k1, log_k2

    def analytic_kl(self, i):
        m1, sd = self._post(self.y)
        m2, _ = self._post(self.data_i(i))
        return (m1 - m2) ** 2 / (2.0 * sd**2)

    def quadrature(self, i, integrand):
        f1 = self.density(self.y)
        f2 = self.density(self.data_i(i))
        m, sd = self._post(self.y)
        lo = max(self.lower, m - 14 * sd)
        hi = min(self.upper, m + 14 * sd)

        def h(x):
            return integrand(f1.pdf(x), f2.pdf(x))

        val, _ = integrate.quad(h, lo, hi, limit=400, epsabs=1e-13, epsrel=1e-11)
        return val


class BoundedHarness(GaussianHarness):
    lower, upper = -1.0, 1.0

    def __init__(self, y, yhat, s=2.0):
        super().__init__(y, yhat, s=s, tau=np.inf)

    def _post(self, v):
        prec = v.size / self.s**2
        return (v.sum() / self.s**2) / prec, 1.0 / np.sqrt(prec)

    def density(self, v):
        m, sd = self._post(v)
        return stats.truncnorm((self.lower - m) / sd, (self.upper - m) / sd, loc=m, scale=sd)

    def log_prior(self, mu):
        return np.where(np.abs(mu) < 1.0, -np.log(2.0), -np.inf)


def bregman_integrand(alpha):
    """Direct-formula integrands, written independently of the package."""
    if alpha == 2:
        return lambda a, b: 0.5 * (a - b) ** 2
    if alpha == 0:
        return lambda a, b: np.log(b / a) + a / b - 1.0
    if alpha == 1:
        return lambda a, b: a * np.log(a / b) - a + b

    def h(a, b):
        c = alpha * alpha - alpha
        pa = (a**alpha - alpha * a + alpha - 1) / c
        pb = (b**alpha - alpha * b + alpha - 1) / c
        dpb = (alpha * b ** (alpha - 1) - alpha) / c
        return pa - pb - (a - b) * dpb

    return h


GAUSSIAN = dict(y=[0.2, -0.5, 1.1, 0.4, 1.9], yhat=[0.5, -0.1, 0.6, 0.4, 0.7])
BOUNDED = dict(y=[0.4, -0.3, 0.9, 0.2], yhat=[0.1, 0.2, 0.1, 1.5])
