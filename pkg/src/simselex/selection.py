"""Selection step: group lasso across solution paths in a quadratic basis.

Each covariate's path over the noise grid is regressed on (1, s, s^2); the
group lasso shrinks whole coefficient triples to exactly zero.  A closed-form
rule decides zero columns (the penalized stationarity condition is
||Lambda' Theta_j||_2 <= penalty), and the surviving columns are solved by
proximal gradient descent.  The same machinery drives the two spline-model
variants: group lasso on per-covariate path norms, and group lasso on the
full per-covariate coefficient-path block under the Frobenius norm.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .simex import LambdaGrid

logger = logging.getLogger("simselex")

_REL_OBJ_TOL = 1e-10
_MAX_PROX_ITERS = 200_000


@dataclass(frozen=True)
class PathDesign:
    """Quadratic basis of the noise grid: rows (1, s, s^2), and the operator
    constant L_op = max eigenvalue of Lambda'Lambda / M."""

    Lambda: np.ndarray
    L_op: float

    @property
    def m(self) -> int:
        return self.Lambda.shape[0]


def build_design(grid: LambdaGrid) -> PathDesign:
    """Quadratic path design for a grid of distinct noise scales."""
    v = np.ravel(np.asarray(grid.values if isinstance(grid, LambdaGrid) else grid,
                            dtype=float))
    if len(np.unique(v)) != len(v):
        raise ConfigError("grid values must be distinct")
    if len(v) < 3:
        raise ConfigError("need at least 3 grid values")
    Lambda = np.column_stack([np.ones_like(v), v, v**2])
    gram = Lambda.T @ Lambda
    L_op = float(np.linalg.eigvalsh(gram / len(v))[-1])
    return PathDesign(Lambda=Lambda, L_op=L_op)


def default_step(design: PathDesign) -> float:
    """The documented default step (20 L_op)^{-1}, capped below the
    convergence bound 1 / sigma_max(Lambda'Lambda)."""
    sigma_max = design.L_op * design.m
    return min(1.0 / (20.0 * design.L_op), 0.99 / sigma_max)


def max_step(design: PathDesign) -> float:
    """Largest convergent step: 1 / sigma_max(Lambda'Lambda)."""
    return 1.0 / (design.L_op * design.m)


def zero_rule(design: PathDesign, theta_col, xi2: float) -> bool:
    """Exact condition for a whole column to be zero in the group-lasso
    solution: ||Lambda' Theta_j||_2 <= xi2."""
    theta_col = np.ravel(np.asarray(theta_col, dtype=float))
    if theta_col.shape[0] != design.m:
        raise ConfigError("path length does not match the design")
    return bool(np.linalg.norm(design.Lambda.T @ theta_col) <= xi2)


@dataclass
class GroupLassoFit:
    """Group-lasso solution over solution-path columns.

    Gamma is 3 x p (flattened group blocks for the matrix-group variant);
    selected holds column indices with exactly nonzero blocks.
    """

    Gamma: np.ndarray
    selected: frozenset
    xi2: float
    iterations: int
    final_objective: float
    objective_history: np.ndarray = field(default=None, repr=False)


def _group_lasso_matrix(Theta, design: PathDesign, xi2: float, step: float,
                        block: int, move_tol: float = 1e-12, Gamma0=None):
    """Shared solver: group lasso of Theta (M x p*block) on the quadratic
    basis, groups being consecutive blocks of `block` columns under the
    Frobenius norm.  Zero groups come from the closed-form rule; the rest
    iterate the proximal map until the relative objective change is below
    1e-10 and the largest coefficient move is below move_tol (default 1e-12).  The
    unpenalized case is solved exactly by least squares.
    Returns (Gamma (3 x p*block), selected, iterations, history)."""
    Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
    Lam = design.Lambda
    m, width = Theta.shape
    if m != design.m:
        raise ConfigError("path rows do not match the design")
    if width % block:
        raise ConfigError("path width is not a multiple of the group size")
    p = width // block
    if xi2 < 0:
        raise ConfigError("penalty must be nonnegative")
    bound = 1.0 / (design.L_op * design.m)
    if not 0 < step < bound:
        raise ConfigError(
            f"step {step:g} outside the convergent range (0, {bound:g})"
        )

    if xi2 == 0:
        Gamma, *_ = np.linalg.lstsq(Lam, Theta, rcond=None)
        resid = Theta - Lam @ Gamma
        norms = np.sqrt((Gamma**2).reshape(3, p, block).sum(axis=(0, 2)))
        selected = frozenset(int(j) for j in np.flatnonzero(norms > 0))
        history = np.array([0.5 * float((resid**2).sum())])
        return Gamma, selected, 0, history

    cross = Lam.T @ Theta                      # 3 x width
    block_norm = np.sqrt(
        (cross**2).reshape(3, p, block).sum(axis=(0, 2))
    )
    selected_mask = block_norm > xi2

    Gamma = np.zeros((3, width))
    history = []
    gram = Lam.T @ Lam
    if selected_mask.any():
        keep_cols = np.repeat(selected_mask, block)
        Th = Theta[:, keep_cols]
        if Gamma0 is not None:
            Ga = np.array(Gamma0[:, keep_cols], dtype=float)
        else:
            Ga = np.zeros((3, Th.shape[1]))
        pb = int(selected_mask.sum())
        rss_zero = float((Theta[:, ~keep_cols] ** 2).sum())
        C = Lam.T @ Th

        def objective(G):
            resid = Th - Lam @ G
            norms = np.sqrt((G**2).reshape(3, pb, block).sum(axis=(0, 2)))
            return 0.5 * (float((resid**2).sum()) + rss_zero) + xi2 * float(norms.sum())

        obj = objective(Ga)
        history.append(obj)
        it = 0
        while it < _MAX_PROX_ITERS:
            it += 1
            omega = Ga + step * (C - gram @ Ga)
            norms = np.sqrt((omega**2).reshape(3, pb, block).sum(axis=(0, 2)))
            shrink = np.maximum(1.0 - step * xi2 / np.where(norms > 0, norms, np.inf), 0.0)
            Ga_new = omega * np.repeat(shrink, block)[None, :]
            new_obj = objective(Ga_new)
            if new_obj > obj:
                # a valid step cannot increase the objective; only float
                # stagnation at convergence can show up here
                if new_obj - obj <= 1e-12 * max(abs(obj), 1.0):
                    break
                raise NumericalError("proximal objective increased")
            move = float(np.max(np.abs(Ga_new - Ga)))
            Ga = Ga_new
            history.append(new_obj)
            done = (obj - new_obj <= _REL_OBJ_TOL * max(abs(obj), 1e-30)
                    and move <= move_tol)
            obj = new_obj
            if done:
                break
        Gamma[:, keep_cols] = Ga
        iterations = it
    else:
        resid = Theta
        history.append(0.5 * float((resid**2).sum()))
        iterations = 0

    final_norms = np.sqrt((Gamma**2).reshape(3, p, block).sum(axis=(0, 2)))
    selected = frozenset(int(j) for j in np.flatnonzero(final_norms > 0))
    return Gamma, selected, iterations, np.asarray(history)


def group_lasso_paths(Theta, design: PathDesign, xi2: float,
                      step: float = None) -> GroupLassoFit:
    """Group lasso over the columns of an M x p solution path."""
    if step is None:
        step = default_step(design)
    Gamma, selected, iters, hist = _group_lasso_matrix(Theta, design, xi2, step, 1)
    return GroupLassoFit(Gamma=Gamma, selected=selected, xi2=float(xi2),
                         iterations=iters, final_objective=float(hist[-1]),
                         objective_history=hist)


def _refit_prediction(Theta_keep, Lam_keep, row, selected, block):
    """Unpenalized per-group quadratic refit on the selected support,
    evaluated at the held-out design row; zeros elsewhere.

    The penalized coefficients are shrunken (prediction with them makes the
    cross-validation score monotone in the penalty), while the estimator
    itself refits selected paths without a penalty before extrapolating;
    scoring the refit keeps the two aligned."""
    width = Theta_keep.shape[1]
    pred = np.zeros(width)
    if selected:
        cols = np.zeros(width // block, dtype=bool)
        cols[sorted(selected)] = True
        keep_cols = np.repeat(cols, block)
        G, *_ = np.linalg.lstsq(Lam_keep, Theta_keep[:, keep_cols], rcond=None)
        pred[keep_cols] = row @ G
    return pred


def _loo_cv_scores(Theta, design: PathDesign, grid_of_xi2, block: int):
    """Leave-one-row-out CV: group-lasso selection on the remaining rows,
    unpenalized refit of the selected groups, prediction of the held-out row,
    squared error summed over all columns.  Internal solves use a larger
    (still convergent) step than the public default for speed."""
    Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
    m = design.m
    scores = np.zeros(len(grid_of_xi2))
    lam_vals = design.Lambda[:, 1]
    for hold in range(m):
        keep = np.arange(m) != hold
        sub_design = build_design(LambdaGrid(lam_vals[keep]))
        sub_step = 0.9 * max_step(sub_design)
        row = design.Lambda[hold]
        # penalties are visited from largest to smallest with warm starts
        order = np.argsort(-np.asarray(grid_of_xi2))
        warm = None
        last_selected = None
        last_pred = None
        for ix in order:
            Gamma, selected, _, _ = _group_lasso_matrix(
                Theta[keep], sub_design, float(grid_of_xi2[ix]), sub_step, block,
                move_tol=1e-5, Gamma0=warm
            )
            warm = Gamma
            if selected != last_selected:
                last_pred = _refit_prediction(Theta[keep], sub_design.Lambda,
                                              row, selected, block)
                last_selected = selected
            scores[ix] += float(((Theta[hold] - last_pred) ** 2).sum())
    return scores


def xi2_grid(Theta, design: PathDesign, length: int = 50, ratio: float = 0.15,
             block: int = 1) -> np.ndarray:
    """Log-spaced penalty grid from the largest column score downwards.

    The floor sits at 0.15 of the strongest column: far below the weakest
    real signal in every benchmark design, but above the tiny systematic
    paths that spurious covariates leave in the replicate averages.  Columns
    that small are predictable, so a prediction-scored cross-validation
    would always keep them if the grid reached low enough; bounding the grid
    is what lets the selection stage do its job."""
    Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
    cross = design.Lambda.T @ Theta
    p = Theta.shape[1] // block
    top = float(np.sqrt((cross**2).reshape(3, p, block).sum(axis=(0, 2))).max())
    if top <= 0:
        return np.geomspace(1.0, ratio, length)
    return np.geomspace(top, ratio * top, length)


def cv_select_xi2(Theta, design: PathDesign, grid_of_xi2=None, block: int = 1,
                  tie_tol: float = 1e-12) -> float:
    """Leave-one-row-out CV over the group-lasso penalty.

    Ties within tie_tol of the minimum break toward the largest penalty
    (sparser model).  Needs at least 4 grid rows; with fewer, generalized CV
    score (residual sum scaled by (1 - df/M)^-2 with df = 3 * #selected / p)
    is used instead, with a warning."""
    Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
    if grid_of_xi2 is None:
        grid_of_xi2 = xi2_grid(Theta, design, block=block)
    grid_of_xi2 = np.asarray(grid_of_xi2, dtype=float)
    m = design.m
    if m < 4:
        logger.warning("fewer than 4 grid rows: falling back to generalized CV")
        scores = np.zeros(len(grid_of_xi2))
        step = 0.9 * max_step(design)
        p = Theta.shape[1] // block
        order = np.argsort(-np.asarray(grid_of_xi2))
        warm = None
        last_selected = None
        last_score = None
        for ix in order:
            Gamma, selected, _, _ = _group_lasso_matrix(Theta, design,
                                                        float(grid_of_xi2[ix]),
                                                        step, block,
                                                        move_tol=1e-5, Gamma0=warm)
            warm = Gamma
            if selected != last_selected:
                # unpenalized refit on the selected support, GCV-scaled
                pred = np.zeros_like(Theta)
                if selected:
                    cols = np.zeros(p, dtype=bool)
                    cols[sorted(selected)] = True
                    keep_cols = np.repeat(cols, block)
                    G, *_ = np.linalg.lstsq(design.Lambda, Theta[:, keep_cols],
                                            rcond=None)
                    pred[:, keep_cols] = design.Lambda @ G
                df = 3.0 * len(selected) / max(p, 1)
                last_score = (float(((Theta - pred) ** 2).sum())
                              / (1.0 - min(df / m, 0.99)) ** 2)
                last_selected = selected
            scores[ix] = last_score
    else:
        scores = _loo_cv_scores(Theta, design, grid_of_xi2, block)
    best = scores.min()
    ok = np.flatnonzero(scores <= best + tie_tol * max(best, 1.0))
    return float(grid_of_xi2[ok[np.argmax(grid_of_xi2[ok])]])


def norm_paths(beta_paths, q: int = 2) -> np.ndarray:
    """Per-covariate path of coefficient-group norms: an M x p x K array of
    grouped coefficient paths collapses to M x p of l_q norms."""
    if q not in (1, 2):
        raise ConfigError("q must be 1 or 2")
    beta_paths = np.asarray(beta_paths, dtype=float)
    if q == 1:
        return np.abs(beta_paths).sum(axis=2)
    return np.sqrt((beta_paths**2).sum(axis=2))


def select_spline_covariates(eta, design: PathDesign, xi4: float = None,
                             step: float = None) -> frozenset:
    """Group lasso on the norm paths; covariate selected iff its quadratic
    coefficient triple survives.  With xi4 omitted, it is chosen by
    leave-one-row-out CV."""
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    if xi4 is None:
        xi4 = cv_select_xi2(eta, design)
    fit = group_lasso_paths(eta, design, xi4, step)
    return fit.selected


def select_spline_all_coefficients(beta_paths, design: PathDesign,
                                   xi3: float = None, step: float = None) -> frozenset:
    """Group lasso on full per-covariate path blocks under the Frobenius
    norm; the zero rule becomes ||Lambda' Theta_j||_F <= xi3 with Theta_j the
    M x K block of covariate j."""
    beta_paths = np.asarray(beta_paths, dtype=float)
    if beta_paths.ndim != 3:
        raise ConfigError("expected an M x p x K array of coefficient paths")
    m, p, Kw = beta_paths.shape
    flat = beta_paths.reshape(m, p * Kw)
    if xi3 is None:
        xi3 = cv_select_xi2(flat, design, block=Kw)
    if step is None:
        step = default_step(design)
    _, selected, _, _ = _group_lasso_matrix(flat, design, float(xi3), step, Kw)
    return selected
