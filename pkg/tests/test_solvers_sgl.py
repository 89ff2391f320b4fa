"""Sum-of-squares sparse group lasso."""

import numpy as np
import pytest

from simselex import sparse_group_lasso_spline
from simselex.errors import ConfigError
from simselex.solvers import cv_sparse_group_lasso, sgl_kappa_max


def make_grouped(rng, n=120, groups=6, size=4, active=2, noise=0.3):
    P = groups * size
    Phi = rng.standard_normal((n, P))
    beta = np.zeros(P)
    for g in range(active):
        beta[g * size:(g + 1) * size] = rng.standard_normal(size)
    y = Phi @ beta + noise * rng.standard_normal(n)
    return Phi, y, beta


class TestSparseGroupLasso:
    def test_unpenalized_residual_orthogonal(self):
        rng = np.random.default_rng(0)
        Phi, y, _ = make_grouped(rng, n=200, groups=5, size=3)
        fit = sparse_group_lasso_spline(Phi, y, kappa=0.0, alpha=0.05, group_size=3)
        yc = y - y.mean()
        resid = yc - Phi @ fit.beta.ravel()
        assert np.max(np.abs(Phi.T @ resid)) < 1e-6

    def test_full_shrinkage(self):
        rng = np.random.default_rng(1)
        Phi, y, _ = make_grouped(rng)
        kmax = sgl_kappa_max(Phi, y - y.mean(), 0.05, 4)
        fit = sparse_group_lasso_spline(Phi, y, kappa=1.01 * kmax, alpha=0.05,
                                        group_size=4)
        assert np.all(fit.beta == 0.0)
        assert np.all(fit.group_norms == 0.0)

    def test_pure_group_lasso_kkt(self):
        rng = np.random.default_rng(2)
        Phi, y, _ = make_grouped(rng, n=150, groups=8, size=3)
        yc = y - y.mean()
        kappa = 0.4 * sgl_kappa_max(Phi, yc, 0.0, 3)
        fit = sparse_group_lasso_spline(Phi, y, kappa=kappa, alpha=0.0, group_size=3)
        resid = yc - Phi @ fit.beta.ravel()
        zeroed = np.flatnonzero(fit.group_norms == 0.0)
        assert zeroed.size > 0
        for g in zeroed:
            block = Phi[:, g * 3:(g + 1) * 3]
            assert np.linalg.norm(block.T @ resid) <= (1 - 0.0) * kappa + 1e-6

    def test_group_norm_zero_iff_block_zero(self):
        rng = np.random.default_rng(3)
        Phi, y, _ = make_grouped(rng)
        kappa = 0.3 * sgl_kappa_max(Phi, y - y.mean(), 0.05, 4)
        fit = sparse_group_lasso_spline(Phi, y, kappa=kappa, alpha=0.05, group_size=4)
        for g in range(6):
            assert (fit.group_norms[g] == 0.0) == np.all(fit.beta[g] == 0.0)

    def test_kkt_certificate(self):
        rng = np.random.default_rng(4)
        Phi, y, _ = make_grouped(rng, n=100, groups=5, size=4)
        kappa = 0.2 * sgl_kappa_max(Phi, y - y.mean(), 0.05, 4)
        fit = sparse_group_lasso_spline(Phi, y, kappa=kappa, alpha=0.05, group_size=4)
        assert fit.kkt < 1e-6

    def test_misshaped_design_rejected(self):
        with pytest.raises(ConfigError):
            sparse_group_lasso_spline(np.ones((10, 7)), np.ones(10), kappa=1.0,
                                      alpha=0.05, group_size=3)
        with pytest.raises(ConfigError):
            sparse_group_lasso_spline(np.ones((10, 6)), np.ones(9), kappa=1.0,
                                      alpha=0.05, group_size=3)

    def test_cv_recovers_active_groups(self):
        rng = np.random.default_rng(5)
        Phi, y, beta = make_grouped(rng, n=200, groups=6, size=4, active=2, noise=0.5)
        fit, cv = cv_sparse_group_lasso(Phi, y, alpha=0.05, group_size=4, seed=1)
        active = {g for g in range(6) if np.any(beta[g * 4:(g + 1) * 4] != 0)}
        selected = set(np.flatnonzero(fit.group_norms > 0))
        assert active <= selected
        assert cv.xi_1se >= cv.xi_min
