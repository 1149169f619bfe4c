import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from harness import BOUNDED, GAUSSIAN, BoundedHarness, GaussianHarness, bregman_integrand
from sarinfluence.divergence import (
    AuxiliaryDensity,
    DivergenceError,
    bregman_divergence,
    bregman_terms,
    imputation_log_ratio,
    is_divergence,
    itakura_saito_terms,
    kl_divergence,
    kl_terms,
    log_normalizer,
    make_report,
    psi,
    psi_prime,
    supreme_proportion,
)
from sarinfluence.model import SarDataset, log_likelihood
from sarinfluence.sampler import PosteriorDraws

ALPHAS = [-1.5, -0.5, 0, 0.5, 1, 1.5, 2, 3]


class TestPsi:
    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_zero_with_zero_slope_at_one(self, alpha):
        assert psi(1.0, alpha) == pytest.approx(0.0, abs=1e-15)
        assert psi_prime(1.0, alpha) == pytest.approx(0.0, abs=1e-15)

    def test_hand_values(self):
        assert psi(3.0, 2) == pytest.approx(2.0)
        assert psi_prime(np.e, 1) == pytest.approx(1.0)
        assert psi(np.e, 0) == pytest.approx(-1 + np.e - 1)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 2.0])
    def test_special_cases_are_limits(self, alpha):
        x = np.array([0.3, 1.7, 5.0])
        for eps in (1e-8, -1e-8):
            np.testing.assert_allclose(psi(x, alpha + eps), psi(x, alpha), atol=1e-6)
            np.testing.assert_allclose(psi_prime(x, alpha + eps), psi_prime(x, alpha), atol=1e-6)

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_derivative_matches_finite_difference(self, alpha):
        x, h = np.array([0.4, 1.3, 2.5]), 1e-6
        fd = (psi(x + h, alpha) - psi(x - h, alpha)) / (2 * h)
        np.testing.assert_allclose(psi_prime(x, alpha), fd, rtol=1e-5, atol=1e-8)

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.nan])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            psi(bad, 2)
        with pytest.raises(ValueError):
            psi_prime(bad, 0.5)

    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(-3, 4),
        st.floats(0.05, 20),
        st.floats(0.05, 20),
        st.floats(0, 1),
    )
    def test_convex(self, alpha, a, b, t):
        mid = psi(t * a + (1 - t) * b, alpha)
        chord = t * psi(a, alpha) + (1 - t) * psi(b, alpha)
        assert mid <= chord + 1e-9 * (1 + abs(chord))

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-3, 4), st.floats(0.05, 20), st.floats(0.05, 20))
    def test_bregman_nonnegative(self, alpha, a, b):
        d = psi(a, alpha) - psi(b, alpha) - (a - b) * psi_prime(b, alpha)
        assert d >= -1e-9 * (1 + abs(psi(a, alpha)))


class TestAuxiliaryDensity:
    @pytest.mark.parametrize(
        "kind,support,draws",
        [
            ("normal", ("real",), stats.norm(1, 2).rvs(500, random_state=1)),
            ("mvn", ("real",), stats.norm(1, 2).rvs(500, random_state=1)),
            ("normal", ("unit",), stats.uniform(-0.9, 1.7).rvs(500, random_state=2)),
            ("normal", ("positive",), stats.gamma(3).rvs(500, random_state=3)),
            ("gamma", ("positive",), stats.gamma(3).rvs(500, random_state=3)),
            ("exponential", ("positive",), stats.expon().rvs(500, random_state=4)),
            ("gamma", ("real",), stats.norm().rvs(500, random_state=5)),
        ],
    )
    def test_integrates_to_one(self, kind, support, draws):
        aux = AuxiliaryDensity.fit(kind, draws[:, None], support)
        lo, hi = {"real": (-np.inf, np.inf), "unit": (-1, 1), "positive": (0, np.inf)}[support[0]]
        val, _ = integrate.quad(lambda x: np.exp(aux.log_density([[x]])[0]), lo, hi, limit=200)
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_codes(self):
        x = np.random.default_rng(0).gamma(2, size=(50, 1))
        for code, kind in [(1, "exponential"), (2, "gamma"), (3, "normal"), (4, "mvn")]:
            assert AuxiliaryDensity.fit(code, x, ("positive",)).kind == kind
        with pytest.raises(ValueError):
            AuxiliaryDensity.fit(5, x, ("positive",))

    def test_outside_support_is_zero(self):
        aux = AuxiliaryDensity.fit("normal", np.array([[0.1], [0.3], [-0.2]]), ("unit",))
        assert aux.log_density([[1.5]])[0] == -np.inf

    def test_default_sar_support(self):
        g = np.random.default_rng(0)
        theta = np.column_stack([g.uniform(0, 0.9, 40), g.gamma(4, size=40), g.normal(size=40)])
        assert AuxiliaryDensity.fit("mvn", theta).support == ("unit", "positive", "real")

    def test_degenerate(self):
        with pytest.raises(DivergenceError):
            AuxiliaryDensity.fit("normal", np.ones((10, 1)), ("real",))


class TestLogNormalizer:
    def test_standard_normal_kernel(self):
        x = np.random.default_rng(7).normal(size=(10000, 1))
        aux = AuxiliaryDensity.fit("normal", x, ("real",))
        est = log_normalizer(x, lambda t: -0.5 * t[:, 0] ** 2, aux)
        assert est == pytest.approx(0.5 * np.log(2 * np.pi), rel=0.02)

    def test_gamma_kernel(self):
        shape = 3.0
        x = np.random.default_rng(8).gamma(shape, size=(10000, 1))
        aux = AuxiliaryDensity.fit("gamma", x, ("positive",))
        est = log_normalizer(x, lambda t: (shape - 1) * np.log(t[:, 0]) - t[:, 0], aux)
        assert np.exp(est) == pytest.approx(2.0, rel=0.02)

    def test_self_normalized_density(self):
        x = np.random.default_rng(9).normal(size=(4000, 2))
        aux = AuxiliaryDensity.fit("mvn", x, ("real", "real"))
        est = log_normalizer(x, stats.multivariate_normal(np.zeros(2)).logpdf, aux)
        assert est == pytest.approx(0.0, abs=0.02)

    def test_separate_sampling_kernel(self):
        x = np.random.default_rng(10).normal(size=(20000, 1))
        aux = AuxiliaryDensity.fit("normal", x, ("real",))
        # target N(0.3, 1) unnormalized, draws from N(0, 1)
        est = log_normalizer(
            x, lambda t: -0.5 * (t[:, 0] - 0.3) ** 2, aux, lambda t: -0.5 * t[:, 0] ** 2
        )
        assert est == pytest.approx(0.5 * np.log(2 * np.pi), rel=0.02)

    def test_non_finite_kernel(self):
        x = np.random.default_rng(0).normal(size=(10, 1))
        aux = AuxiliaryDensity.fit("normal", x, ("real",))
        with pytest.raises(DivergenceError):
            log_normalizer(x, np.full(10, np.nan), aux)


class TestSupremeProportion:
    def test_example(self):
        D = [[1.0, 3.0, 2.0], [5.0, 1.0, 0.0], [0.0, 2.0, 1.0], [0.1, 0.2, 0.3]]
        np.testing.assert_array_equal(supreme_proportion(D), [0.25, 0.5, 0.25])

    def test_ties_go_to_lowest_index(self):
        np.testing.assert_array_equal(supreme_proportion([[2.0, 2.0, 1.0]]), [1.0, 0.0, 0.0])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 8))
    def test_sums_to_one_and_monotone_invariant(self, seed, S, n):
        D = np.random.default_rng(seed).normal(size=(S, n))
        p = supreme_proportion(D)
        assert p.sum() == pytest.approx(1.0)
        np.testing.assert_array_equal(p, supreme_proportion(np.exp(D) * 3 + 1))

    def test_empty(self):
        with pytest.raises(ValueError):
            supreme_proportion(np.empty((0, 3)))


@pytest.fixture(scope="module")
def gaussian():
    h = GaussianHarness(**GAUSSIAN)
    theta = h.draws(10000, seed=1)
    return h, theta, h.kernels(theta), AuxiliaryDensity.fit("normal", theta, ("real",))


@pytest.fixture(scope="module")
def bounded():
    h = BoundedHarness(**BOUNDED)
    theta = h.draws(10000, seed=1)
    return h, theta, h.kernels(theta), AuxiliaryDensity.fit("normal", theta, ("unit",))


class TestHarnessOracles:
    def test_quadrature_kl_matches_closed_form(self):
        h = GaussianHarness(**GAUSSIAN)
        for i in range(h.n):
            assert h.quadrature(i, bregman_integrand(1)) == pytest.approx(
                h.analytic_kl(i), rel=1e-7, abs=1e-12
            )

    def test_kl_estimate(self, gaussian):
        h, theta, (k1, k2), _ = gaussian
        est = kl_terms(k1[:, None] - k2).mean(axis=0)
        for i in range(h.n):
            assert est[i] == pytest.approx(h.analytic_kl(i), rel=0.05, abs=1e-12)

    @pytest.mark.parametrize("alpha", [2, 0.5, 1.5])
    def test_bregman_gaussian(self, gaussian, alpha):
        h, theta, (k1, k2), aux = gaussian
        est = bregman_terms(k1, k2, aux.log_density(theta), alpha).mean(axis=0)
        for i in range(h.n):
            ref = h.quadrature(i, bregman_integrand(alpha))
            assert est[i] == pytest.approx(ref, rel=0.05, abs=1e-6)

    @pytest.mark.parametrize("alpha", [2, 0.5])
    def test_bregman_bounded(self, bounded, alpha):
        h, theta, (k1, k2), aux = bounded
        est = bregman_terms(k1, k2, aux.log_density(theta), alpha).mean(axis=0)
        for i in range(h.n):
            ref = h.quadrature(i, bregman_integrand(alpha))
            assert est[i] == pytest.approx(ref, rel=0.05, abs=1e-6)

    def test_itakura_saito_bounded(self, bounded):
        h, theta, (k1, k2), aux = bounded
        est = itakura_saito_terms(k1, k2, aux.log_density(theta)).mean(axis=0)
        for i in range(h.n):
            ref = h.quadrature(i, bregman_integrand(0))
            assert est[i] == pytest.approx(ref, rel=0.05)

    def test_itakura_saito_is_alpha_zero_limit(self, bounded):
        _, theta, (k1, k2), aux = bounded
        lg = aux.log_density(theta)
        a = itakura_saito_terms(k1, k2, lg).mean(axis=0)
        b = bregman_terms(k1, k2, lg, 1e-6).mean(axis=0)
        np.testing.assert_allclose(a, b, rtol=0.01)

    def test_zero_imputation_gives_zero(self, gaussian):
        # index 3 has yhat equal to y
        h, theta, (k1, k2), aux = gaussian
        lg = aux.log_density(theta)
        assert kl_terms(k1[:, None] - k2).mean(axis=0)[3] == pytest.approx(0.0, abs=1e-12)
        assert bregman_terms(k1, k2, lg, 2).mean(axis=0)[3] == pytest.approx(0.0, abs=1e-10)


class TestSelfDivergence:
    def setup_method(self):
        g = np.random.default_rng(3)
        self.theta = g.normal(size=(500, 1))
        self.k1 = -0.5 * self.theta[:, 0] ** 2
        self.k2 = np.column_stack([self.k1, self.k1])
        self.lg = AuxiliaryDensity.fit("normal", self.theta, ("real",)).log_density(self.theta)

    def test_kl_exactly_zero(self):
        assert np.all(kl_terms(self.k1[:, None] - self.k2) == 0.0)

    @pytest.mark.parametrize("alpha", [-1, 0.5, 2, 3])
    def test_bregman(self, alpha):
        assert np.max(np.abs(bregman_terms(self.k1, self.k2, self.lg, alpha))) <= 1e-10

    def test_itakura_saito(self):
        assert np.max(np.abs(itakura_saito_terms(self.k1, self.k2, self.lg))) <= 1e-10


class TestSarWrappers:
    @pytest.fixture
    def setup(self, small_data, default_prior):
        g = np.random.default_rng(1)
        S = 300
        values = np.column_stack(
            [
                g.uniform(0.1, 0.6, S),
                g.uniform(0.7, 1.4, S),
                g.normal(0, 0.3, (S, small_data.k + 1)),
            ]
        )
        yhat = small_data.y + g.normal(0, 0.5, small_data.n)
        return small_data, default_prior, values, yhat

    def test_log_ratio_matches_recomputation(self, setup):
        data, _, values, yhat = setup
        got = imputation_log_ratio(data, yhat, values)
        for s in range(0, values.shape[0], 37):
            from sarinfluence.model import SarParams

            p = SarParams.from_vector(values[s])
            for i in range(data.n):
                y_i = data.y.copy()
                y_i[i] = yhat[i]
                ref = log_likelihood(data, p) - log_likelihood(data.with_y(y_i), p)
                assert got[s, i] == pytest.approx(ref, rel=1e-9, abs=1e-9)

    def test_reports(self, setup):
        data, prior, values, yhat = setup
        draws = PosteriorDraws(values, np.zeros(values.shape[0], dtype=int), seed=0,
                               names=tuple(f"p{j}" for j in range(values.shape[1])))
        for rep in (
            kl_divergence(data, yhat, draws),
            is_divergence(data, yhat, draws, prior, "mvn"),
            bregman_divergence(data, yhat, draws, prior, 3, alpha=2),
        ):
            assert rep.per_obs.shape == (data.n,)
            assert np.all(rep.per_obs >= -1e-8)
        p = kl_divergence(data, yhat, values, type=2).per_obs
        assert p.sum() == pytest.approx(1.0)

    def test_unchanged_data_gives_zero(self, setup):
        data, prior, values, _ = setup
        assert np.all(kl_divergence(data, data.y, values).per_obs == 0.0)
        rep = bregman_divergence(data, data.y, values, prior, "normal", alpha=2)
        np.testing.assert_allclose(rep.per_obs, 0.0, atol=1e-10)

    @pytest.mark.parametrize("alpha", [0, 1])
    def test_bregman_rejects_special_alphas(self, setup, alpha):
        data, prior, values, yhat = setup
        with pytest.raises(ValueError):
            bregman_divergence(data, yhat, values, prior, "normal", alpha=alpha)

    def test_yhat_length(self, setup):
        data, _, values, yhat = setup
        with pytest.raises(ValueError, match="length"):
            kl_divergence(data, yhat[:-1], values)

    def test_report_type(self):
        with pytest.raises(ValueError):
            make_report("kl", 1.0, 3, np.zeros((2, 2)))
