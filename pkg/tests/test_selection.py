"""Group lasso across solution paths: zero rule, proximal solver, CV."""

import numpy as np
import pytest

from simselex import (LambdaGrid, build_design, cv_select_xi2, group_lasso_paths,
                      make_lambda_grid, norm_paths,
                      select_spline_all_coefficients, select_spline_covariates,
                      zero_rule)
from simselex.errors import ConfigError
from simselex.selection import default_step, max_step, xi2_grid

DEFAULT_GRID = make_lambda_grid(5, 0.01, 2.0)


def fixed_point_oracle(Lam, theta_col, xi2, tol=1e-13):
    """Independent per-column solution via the stationarity equation.

    For a nonzero column, Gamma = (Lam'Lam + xi2/||Gamma|| I)^{-1} Lam'theta;
    writing s = ||Gamma|| in the eigenbasis of Lam'Lam gives a scalar
    equation sum_k q_k^2 / (d_k + xi2/s)^2 = s^2, solved by bisection.
    """
    b = Lam.T @ theta_col
    if np.linalg.norm(b) <= xi2:
        return np.zeros(3)
    d, V = np.linalg.eigh(Lam.T @ Lam)
    q = V.T @ b

    def excess(s):
        return np.sum(q**2 / (d + xi2 / s) ** 2) - s**2

    lo, hi = 1e-12, np.linalg.norm(b) / max(d.min(), 1e-12) + 1.0
    while excess(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    return V @ (q / (d + xi2 / s))


def frobenius_oracle(Lam, theta_block, xi3):
    """Matrix-group analogue of fixed_point_oracle (Frobenius norm)."""
    B = Lam.T @ theta_block
    if np.linalg.norm(B) <= xi3:
        return np.zeros_like(B)
    d, V = np.linalg.eigh(Lam.T @ Lam)
    Q = V.T @ B

    def excess(s):
        return float(np.sum(Q**2 / (d[:, None] + xi3 / s) ** 2) - s**2)

    lo, hi = 1e-12, np.linalg.norm(B) / max(d.min(), 1e-12) + 1.0
    while excess(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    return V @ (Q / (d[:, None] + xi3 / s))


class TestDesign:
    def test_duplicate_grid_rejected(self):
        with pytest.raises(ConfigError):
            build_design(np.array([1.0, 1.0, 2.0]))

    def test_second_column_sum(self):
        design = build_design(DEFAULT_GRID)
        assert design.Lambda[:, 1].sum() == pytest.approx(5.025, abs=1e-12)

    def test_l_op_matches_power_iteration(self):
        design = build_design(DEFAULT_GRID)
        A = design.Lambda.T @ design.Lambda / 5.0
        v = np.ones(3) / np.sqrt(3)
        for _ in range(5000):
            w = A @ v
            v = w / np.linalg.norm(w)
        assert design.L_op == pytest.approx(float(v @ A @ v), rel=1e-10)


class TestZeroRule:
    def test_zero_path_always_zeroed(self):
        design = build_design(DEFAULT_GRID)
        assert zero_rule(design, np.zeros(5), 0.0)
        assert zero_rule(design, np.zeros(5), 3.0)

    def test_constant_path_threshold(self):
        design = build_design(DEFAULT_GRID)
        v = DEFAULT_GRID.values
        norm = np.sqrt(5.0**2 + v.sum() ** 2 + (v**2).sum() ** 2)
        assert norm == pytest.approx(10.338, abs=0.001)
        ones = np.ones(5)
        assert zero_rule(design, ones, norm + 1e-9)
        assert not zero_rule(design, ones, norm - 1e-9)

    def test_unpenalized_nonzero(self):
        design = build_design(DEFAULT_GRID)
        assert not zero_rule(design, np.array([1.0, 0.5, 0.3, 0.2, 0.1]), 0.0)


class TestGroupLassoPaths:
    def test_unpenalized_matches_least_squares(self):
        rng = np.random.default_rng(0)
        design = build_design(DEFAULT_GRID)
        Theta = rng.standard_normal((5, 7))
        fit = group_lasso_paths(Theta, design, 0.0)
        expected = np.linalg.solve(design.Lambda.T @ design.Lambda,
                                   design.Lambda.T @ Theta)
        assert np.max(np.abs(fit.Gamma - expected)) < 1e-8

    def test_full_shrinkage(self):
        rng = np.random.default_rng(1)
        design = build_design(DEFAULT_GRID)
        Theta = rng.standard_normal((5, 6))
        xi2 = float(np.linalg.norm(design.Lambda.T @ Theta, axis=0).max()) + 1e-9
        fit = group_lasso_paths(Theta, design, xi2)
        assert not fit.selected
        assert np.all(fit.Gamma == 0.0)

    def test_matches_fixed_point_oracle(self):
        rng = np.random.default_rng(2)
        design = build_design(DEFAULT_GRID)
        Theta = rng.standard_normal((5, 10))
        xi2 = 1.0
        fit = group_lasso_paths(Theta, design, xi2)

        def objective(G):
            r = Theta - design.Lambda @ G
            return 0.5 * (r**2).sum() + xi2 * np.linalg.norm(G, axis=0).sum()

        oracle_G = np.column_stack([
            fixed_point_oracle(design.Lambda, Theta[:, j], xi2) for j in range(10)
        ])
        assert abs(objective(fit.Gamma) - objective(oracle_G)) < 1e-7
        for j in range(10):
            assert np.max(np.abs(fit.Gamma[:, j] - oracle_G[:, j])) < 1e-5
            assert (np.all(fit.Gamma[:, j] == 0)) == (np.all(oracle_G[:, j] == 0))

    def test_objective_monotone_every_iteration(self):
        design = build_design(DEFAULT_GRID)
        for seed in range(20):
            rng = np.random.default_rng(seed)
            Theta = rng.standard_normal((5, 8)) * rng.uniform(0.5, 3)
            fit = group_lasso_paths(Theta, design, rng.uniform(0.1, 3.0))
            hist = fit.objective_history
            assert np.all(np.diff(hist) <= 0.0)

    def test_zero_rule_solver_agreement(self):
        design = build_design(DEFAULT_GRID)
        rng = np.random.default_rng(3)
        for _ in range(100):
            Theta = rng.standard_normal((5, 6)) * rng.uniform(0.2, 2.0)
            xi2 = rng.uniform(0.0, 6.0)
            fit = group_lasso_paths(Theta, design, xi2)
            for j in range(6):
                is_zero = np.all(np.abs(fit.Gamma[:, j]) == 0.0)
                assert zero_rule(design, Theta[:, j], xi2) == is_zero

    def test_step_bound_enforced(self):
        design = build_design(DEFAULT_GRID)
        too_big = 1.01 * max_step(design)
        with pytest.raises(ConfigError, match="convergent range"):
            group_lasso_paths(np.ones((5, 2)), design, 0.5, step=too_big)

    def test_scaling_covariance(self):
        rng = np.random.default_rng(4)
        design = build_design(DEFAULT_GRID)
        Theta = rng.standard_normal((5, 6))
        c = 3.7
        f1 = group_lasso_paths(Theta, design, 0.8)
        f2 = group_lasso_paths(c * Theta, design, c * 0.8)
        assert f1.selected == f2.selected
        assert np.max(np.abs(f2.Gamma - c * f1.Gamma)) < 1e-6 * c

    def test_monotone_support(self):
        rng = np.random.default_rng(5)
        design = build_design(DEFAULT_GRID)
        Theta = rng.standard_normal((5, 12))
        sizes = []
        for xi2 in (0.1, 0.5, 1.0, 2.0, 4.0):
            sizes.append(len(group_lasso_paths(Theta, design, xi2).selected))
        assert all(a >= b for a, b in zip(sizes, sizes[1:]))


class TestCvSelect:
    def test_noiseless_recovery(self):
        rng = np.random.default_rng(6)
        design = build_design(DEFAULT_GRID)
        Gamma_true = np.zeros((3, 9))
        Gamma_true[:, :3] = rng.standard_normal((3, 3)) + 1.0
        Theta = design.Lambda @ Gamma_true
        xi2 = cv_select_xi2(Theta, design)
        fit = group_lasso_paths(Theta, design, xi2)
        assert fit.selected == frozenset({0, 1, 2})

    def test_all_zero_ties_break_to_largest(self):
        design = build_design(DEFAULT_GRID)
        Theta = np.zeros((5, 4))
        grid = np.geomspace(10.0, 0.01, 20)
        assert cv_select_xi2(Theta, design, grid) == pytest.approx(10.0)

    def test_cv_scores_match_double_loop(self):
        from simselex.selection import _loo_cv_scores, _group_lasso_matrix
        rng = np.random.default_rng(7)
        design = build_design(DEFAULT_GRID)
        Theta = rng.standard_normal((5, 5))
        grid = xi2_grid(Theta, design, length=6)
        fast = _loo_cv_scores(Theta, design, grid, 1)
        slow = np.zeros(len(grid))
        lam_vals = DEFAULT_GRID.values
        for hold in range(5):
            keep = np.arange(5) != hold
            sub = build_design(LambdaGrid(lam_vals[keep]))
            warm = None
            for ix in np.argsort(-grid):
                G, selected, _, _ = _group_lasso_matrix(Theta[keep], sub,
                                                        float(grid[ix]),
                                                        0.9 * max_step(sub), 1,
                                                        move_tol=1e-5, Gamma0=warm)
                warm = G
                pred = np.zeros(5)
                if selected:
                    cols = np.array([j in selected for j in range(5)])
                    Gr, *_ = np.linalg.lstsq(sub.Lambda, Theta[keep][:, cols],
                                             rcond=None)
                    pred[cols] = design.Lambda[hold] @ Gr
                slow[ix] += float(((Theta[hold] - pred) ** 2).sum())
        assert np.max(np.abs(fast - slow)) < 1e-12 * max(1.0, np.max(np.abs(slow)))

    def test_gcv_fallback_warns(self, caplog):
        design = build_design(np.array([0.5, 1.0, 1.5]))
        Theta = np.ones((3, 2))
        with caplog.at_level("WARNING", logger="simselex"):
            cv_select_xi2(Theta, design)
        assert any("generalized CV" in rec.message for rec in caplog.records)


class TestNormPaths:
    def test_zero(self):
        assert np.all(norm_paths(np.zeros((4, 3, 2)), 2) == 0.0)

    def test_single_coefficient_group(self):
        paths = np.random.default_rng(8).standard_normal((4, 3, 1))
        assert np.allclose(norm_paths(paths, 1), np.abs(paths[:, :, 0]))
        assert np.allclose(norm_paths(paths, 2), np.abs(paths[:, :, 0]))

    def test_hand_computed(self):
        arr = np.arange(12, dtype=float).reshape(2, 3, 2)
        l1 = norm_paths(arr, 1)
        l2 = norm_paths(arr, 2)
        for m in range(2):
            for j in range(3):
                assert l1[m, j] == pytest.approx(abs(arr[m, j, 0]) + abs(arr[m, j, 1]))
                assert l2[m, j] == pytest.approx(np.hypot(arr[m, j, 0], arr[m, j, 1]))


class TestSplineSelection:
    def test_zero_norm_column_never_selected(self):
        rng = np.random.default_rng(9)
        design = build_design(DEFAULT_GRID)
        eta = np.abs(rng.standard_normal((5, 6)))
        eta[:, 4] = 0.0
        sel = select_spline_covariates(eta, design)
        assert 4 not in sel

    def test_noiseless_norms_recovered(self):
        rng = np.random.default_rng(10)
        design = build_design(DEFAULT_GRID)
        Gamma_true = np.zeros((3, 8))
        Gamma_true[0, :3] = (3.0, 2.0, 4.0)
        Gamma_true[1, :3] = -0.4
        eta = design.Lambda @ Gamma_true
        sel = select_spline_covariates(eta, design)
        assert sel == frozenset({0, 1, 2})

    def test_all_coef_zero_block_never_selected(self):
        rng = np.random.default_rng(11)
        design = build_design(DEFAULT_GRID)
        paths = rng.standard_normal((5, 4, 3))
        paths[:, 2, :] = 0.0
        sel = select_spline_all_coefficients(paths, design)
        assert 2 not in sel

    def test_all_coef_single_column_reduces_to_vector_case(self):
        rng = np.random.default_rng(12)
        design = build_design(DEFAULT_GRID)
        Theta = rng.standard_normal((5, 6))
        xi = 1.2
        vec_fit = group_lasso_paths(Theta, design, xi)
        blk_sel = select_spline_all_coefficients(Theta[:, :, None], design, xi3=xi)
        assert blk_sel == vec_fit.selected

    def test_all_coef_matches_frobenius_oracle(self):
        rng = np.random.default_rng(13)
        design = build_design(DEFAULT_GRID)
        paths = rng.standard_normal((5, 4, 3))
        xi3 = 2.0
        sel = select_spline_all_coefficients(paths, design, xi3=xi3)
        for j in range(4):
            oracle = frobenius_oracle(design.Lambda, paths[:, j, :], xi3)
            assert (j in sel) == bool(np.any(oracle != 0))
