"""Dataset types, generators, microarray standardization, delta_v."""

import numpy as np
import pytest
from scipy import stats

from simselex import (ContaminatedDataset, CoxSimConfig, LinearSimConfig,
                      OutcomeVector, SplineSimConfig, ar1_covariance, delta_v,
                      generate_cox_dataset, generate_linear_dataset,
                      generate_logistic_dataset, generate_spline_dataset,
                      standardize_microarray)
from simselex.data import spline_f3
from simselex.errors import ConfigError, NumericalError


def linear_cfg(**kw):
    base = dict(n=300, p=100, rho=0.25, sigma_u_scalar=0.45, sigma_eps=0.128,
                theta=np.concatenate([np.ones(5), np.zeros(95)]), seed=7)
    base.update(kw)
    return LinearSimConfig(**base)


class TestTypes:
    def test_binary_outcome_rejects_noninteger(self):
        with pytest.raises(ConfigError):
            OutcomeVector("binary", [0.0, 0.5, 1.0])

    def test_survival_requires_event(self):
        with pytest.raises(ConfigError):
            OutcomeVector("survival", [1.0, 2.0])

    def test_survival_requires_positive_times(self):
        with pytest.raises(ConfigError):
            OutcomeVector("survival", [1.0, -2.0], [True, False])

    def test_continuous_rejects_event(self):
        with pytest.raises(ConfigError):
            OutcomeVector("continuous", [1.0, 2.0], [True, False])

    def test_dataset_shape_checks(self):
        y = OutcomeVector("continuous", np.zeros(5))
        with pytest.raises(ConfigError):
            ContaminatedDataset(W=np.zeros((5, 3)), outcome=y, sigma_u=np.eye(4))
        with pytest.raises(ConfigError):
            ContaminatedDataset(W=np.zeros((4, 3)), outcome=y, sigma_u=np.eye(3))

    def test_dataset_rejects_asymmetric_sigma(self):
        y = OutcomeVector("continuous", np.zeros(4))
        bad = np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(ConfigError):
            ContaminatedDataset(W=np.zeros((4, 3)), outcome=y, sigma_u=bad)

    def test_dataset_rejects_indefinite_sigma(self):
        y = OutcomeVector("continuous", np.zeros(4))
        bad = np.array([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(ConfigError):
            ContaminatedDataset(W=np.zeros((4, 3)), outcome=y, sigma_u=bad)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            linear_cfg(rho=1.0)
        with pytest.raises(ConfigError):
            linear_cfg(sigma_u_scalar=-0.1)
        with pytest.raises(ConfigError):
            linear_cfg(n=1)
        with pytest.raises(ConfigError):
            LinearSimConfig(n=10, p=0, rho=0.0, sigma_u_scalar=0.0,
                            sigma_eps=0.0, theta=np.zeros(0), seed=1)


class TestLinearGenerator:
    def test_zero_noise_reproduces_first_column(self):
        theta = np.zeros(10)
        theta[0] = 1.0
        cfg = linear_cfg(n=50, p=10, sigma_u_scalar=0.0, sigma_eps=0.0, theta=theta)
        ds = generate_linear_dataset(cfg)
        assert np.allclose(ds.outcome.y, ds.x_latent[:, 0])
        assert np.array_equal(ds.W, ds.x_latent)

    def test_observed_variance_matches_design(self):
        # Var(W_j) = 1 + 0.45^2; sample-moment check at n = 1e5
        cfg = linear_cfg(n=100_000, p=5, theta=np.zeros(5), seed=11)
        ds = generate_linear_dataset(cfg)
        var = ds.W.var(axis=0)
        assert np.all(np.abs(var - 1.2025) / 1.2025 < 0.03)

    def test_determinism(self):
        cfg = linear_cfg(n=40, p=8, theta=np.ones(8))
        d1 = generate_linear_dataset(cfg)
        d2 = generate_linear_dataset(cfg)
        assert np.array_equal(d1.W, d2.W)
        assert np.array_equal(d1.outcome.y, d2.outcome.y)

    def test_latent_covariance_fidelity(self):
        cfg = linear_cfg(n=100_000, p=5, theta=np.zeros(5), seed=3)
        ds = generate_linear_dataset(cfg)
        sample = np.cov(ds.x_latent, rowvar=False, ddof=0)
        assert np.max(np.abs(sample - ar1_covariance(5, 0.25))) < 0.01


class TestLogisticGenerator:
    def test_balanced_when_theta_zero(self):
        cfg = linear_cfg(n=10_000, p=4, theta=np.zeros(4), seed=5)
        ds = generate_logistic_dataset(cfg)
        phat = ds.outcome.y.mean()
        # 3 sigma binomial band around 1/2
        assert abs(phat - 0.5) < 3 * 0.5 / np.sqrt(10_000)

    def test_saturation(self):
        cfg = linear_cfg(n=2000, p=3, theta=np.array([50.0, 0.0, 0.0]),
                         rho=0.0, seed=9)
        ds = generate_logistic_dataset(cfg)
        positive = ds.x_latent[:, 0] > 0.3   # expit(15) is 1 within 3e-7
        assert positive.sum() > 100
        assert np.all(ds.outcome.y[positive] == 1.0)

    def test_class_balance_across_seeds(self):
        theta = np.concatenate([np.ones(5), np.zeros(95)])
        fractions = []
        for seed in range(100):
            ds = generate_logistic_dataset(linear_cfg(theta=theta, seed=seed))
            fractions.append(ds.outcome.y.mean())
        fractions = np.asarray(fractions)
        assert np.all(fractions > 0.2) and np.all(fractions < 0.8)


class TestCoxGenerator:
    def cfg(self, **kw):
        base = dict(n=300, p=100, rho=0.25, sigma_u_scalar=0.45,
                    theta=np.concatenate([np.ones(5), np.zeros(95)]), seed=1,
                    weibull_shape=1.0, weibull_scale=0.01, censor_rate=0.001)
        base.update(kw)
        return CoxSimConfig(**base)

    def test_shape_one_weibull_is_exponential(self):
        cfg = self.cfg(n=10_000, p=2, theta=np.zeros(2), censor_rate=1e-12)
        ds = generate_cox_dataset(cfg)
        # all events, T ~ Exp(0.01)
        assert ds.outcome.event.all()
        stat = stats.kstest(ds.outcome.y, "expon", args=(0, 100.0))
        assert stat.pvalue > 0.01

    def test_equal_rates_censor_half(self):
        cfg = self.cfg(n=20_000, p=2, theta=np.zeros(2), weibull_scale=0.01,
                       censor_rate=0.01)
        ds = generate_cox_dataset(cfg)
        frac_censored = 1.0 - ds.outcome.event.mean()
        assert abs(frac_censored - 0.5) < 0.02

    def test_reference_design_censoring_fraction(self):
        fracs = [1.0 - generate_cox_dataset(self.cfg(seed=s)).outcome.event.mean()
                 for s in range(30)]
        assert 0.20 <= np.mean(fracs) <= 0.25

    def test_event_ordering_invariant(self):
        cfg = self.cfg(n=500, p=3, theta=np.zeros(3), seed=4)
        ds = generate_cox_dataset(cfg)
        assert np.all(ds.outcome.y > 0)

    def test_rejects_bad_rates(self):
        with pytest.raises(ConfigError):
            self.cfg(censor_rate=0.0)


class TestSplineGenerator:
    def test_uniform_marginals(self):
        cfg = SplineSimConfig(n=10_000, p=5, seed=2)
        ds = generate_spline_dataset(cfg)
        for j in range(5):
            stat = stats.kstest(ds.x_latent[:, j], "uniform", args=(-3.0, 6.0))
            assert stat.pvalue > 0.001

    def test_f3_centered(self):
        # (1/6) * integral of (1-t)^2 - 4 over [-3, 3] is exactly 0
        t = np.linspace(-3, 3, 1_000_001)
        riemann = np.trapezoid(spline_f3(t), t) / 6.0
        assert abs(riemann) < 1e-9
        cfg = SplineSimConfig(n=200_000, p=4, seed=6)
        ds = generate_spline_dataset(cfg)
        assert abs(spline_f3(ds.x_latent[:, 2]).mean()) < 0.02

    def test_noise_to_signal_ratio(self):
        # Var U[-3,3] = 3, so sigma_u_sq = 0.15 is a 5% ratio
        assert SplineSimConfig(n=10, p=4, sigma_u_sq=0.15).sigma_u_sq / 3.0 == pytest.approx(0.05)

    def test_rejects_small_p(self):
        with pytest.raises(ConfigError):
            SplineSimConfig(n=10, p=3)


class TestMicroarray:
    def test_no_error_keeps_everything(self):
        rng = np.random.default_rng(0)
        mu = rng.standard_normal((20, 6))
        ds, kept = standardize_microarray(mu, np.zeros_like(mu), 0.5)
        assert list(kept) == list(range(6))
        assert np.allclose(ds.sigma_u, 0.0)
        assert np.max(np.abs(ds.W.mean(axis=0))) < 1e-12
        assert np.max(np.abs((ds.W**2).mean(axis=0) - 1.0)) < 1e-10

    def test_boundary_gene_dropped_strict(self):
        rng = np.random.default_rng(1)
        mu = rng.standard_normal((50, 2))
        col_var = ((mu - mu.mean(axis=0)) ** 2).mean(axis=0)
        var = np.zeros_like(mu)
        var[:, 0] = 0.5 * col_var[0]       # exactly at the cutoff: dropped
        var[:, 1] = 0.49 * col_var[1]      # just below: kept
        ds, kept = standardize_microarray(mu, var, 0.5)
        assert list(kept) == [1]

    def test_three_gene_toy_exact(self):
        mu = np.array([[1.0, 2.0, 3.0],
                       [3.0, 2.0, 1.0],
                       [5.0, 8.0, 2.0]])
        var = np.array([[0.1, 0.2, 0.3],
                        [0.1, 0.2, 0.3],
                        [0.1, 0.2, 0.3]])
        # spreadsheet-style recomputation with Fractions
        from fractions import Fraction as F
        mu_f = [[F(1), F(2), F(3)], [F(3), F(2), F(1)], [F(5), F(8), F(2)]]
        means = [sum(col) / 3 for col in zip(*mu_f)]
        variances = [sum((row[j] - means[j]) ** 2 for row in mu_f) / 3 for j in range(3)]
        err = [F(1, 10), F(2, 10), F(3, 10)]
        ds, kept = standardize_microarray(mu, var, 0.5)
        exp_keep = [j for j in range(3) if err[j] < F(1, 2) * variances[j]]
        assert list(kept) == exp_keep
        for out_col, j in enumerate(kept):
            col = (mu[:, j] - float(means[j])) / np.sqrt(float(variances[j]))
            assert np.allclose(ds.W[:, out_col], col, atol=1e-14)
            assert ds.sigma_u[out_col, out_col] == pytest.approx(
                float(err[j] / variances[j]), abs=1e-15)

    def test_zero_variance_gene_dropped(self):
        mu = np.column_stack([np.ones(10), np.arange(10.0)])
        ds, kept = standardize_microarray(mu, np.zeros_like(mu), 0.5)
        assert list(kept) == [1]


class TestDeltaV:
    def test_zero_error(self):
        assert delta_v(np.eye(3), np.zeros((3, 3))) == pytest.approx(0.0)

    def test_reference_design_small_block(self):
        sigma = ar1_covariance(5, 0.25)
        assert delta_v(sigma, 0.2025 * np.eye(5)) == pytest.approx(1.73, rel=0.01)

    def test_reference_design_full(self):
        sigma = ar1_covariance(100, 0.25)
        value = delta_v(sigma, 0.2025 * np.eye(100))
        assert abs(np.log10(value) - np.log10(7.6e8)) < 0.05 * np.log10(7.6e8)

    def test_singular_sigma_rejected(self):
        with pytest.raises(NumericalError):
            delta_v(np.zeros((2, 2)), np.eye(2))
