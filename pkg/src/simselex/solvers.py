"""Penalized estimation primitives.

Coordinate-descent lasso for linear and logistic outcomes, the penalized Cox
partial likelihood (Breslow ties), sum-of-squares sparse group lasso for the
spline designs, the l1-constrained corrected least-squares estimator, and
K-fold cross-validation with both the minimum and the one-standard-error
rule.

Scaling conventions match glmnet: 1/(2n) for the squared-error loss and 1/n
for the logistic and Cox negative log-likelihoods, so penalty grids do not
depend on the sample size.  Solvers standardize columns internally by
default and back-transform the coefficients; the logistic intercept is never
penalized and the Cox model has no intercept.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .data import ContaminatedDataset, OutcomeVector
from .errors import ConfigError, NumericalError
from .seeds import child_rng

logger = logging.getLogger("simselex")

PATH_LEN = 100
PATH_RATIO = 1e-3
_FOLD_TOL = 1e-4
_FINAL_TOL = 1e-9
_KKT_TOL = 1e-8
MAX_SWEEPS = 100_000
_B0_CAP = 30.0


def soft_threshold(z: float, t: float) -> float:
    """sign(z) * max(|z| - t, 0); the scalar coordinate-descent kernel."""
    if t < 0:
        raise ConfigError("threshold must be nonnegative")
    return float(np.sign(z) * max(abs(z) - t, 0.0))


def penalty_grid(lam_max: float, length: int = PATH_LEN, ratio: float = PATH_RATIO) -> np.ndarray:
    """Log-spaced penalty path from lam_max down to ratio * lam_max.

    The top is inflated by a relative 1e-10 so that the fit at the head of
    the path is the null model regardless of float summation order."""
    if lam_max <= 0:
        raise NumericalError("cannot build a penalty grid from a zero gradient")
    lam_max = lam_max * (1.0 + 1e-10)
    return np.geomspace(lam_max, ratio * lam_max, length)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ConfigError("non-finite values in input")


def _scale_columns(X, center):
    """Return (X_std fortran-ordered, mu, scale).  Columns with zero spread
    keep scale 1 so they simply never enter the model."""
    mu = X.mean(axis=0) if center else np.zeros(X.shape[1])
    Xc = X - mu
    scale = np.sqrt((Xc**2).mean(axis=0))
    scale[scale == 0] = 1.0
    return np.asfortranarray(Xc / scale), mu, scale


@dataclass
class LassoFit:
    """A single lasso solution with its KKT certificate.

    coefficients are on the original scale of the inputs; for standardized
    fits the reported objective and KKT residual refer to the standardized
    problem that was actually solved.
    """

    coefficients: np.ndarray
    intercept: float
    penalty: float
    objective: float
    iterations: int
    converged: bool
    kkt: float = np.nan
    flags: tuple = ()


@dataclass
class CvResult:
    """Cross-validation curve with the two standard tuning rules."""

    grid: np.ndarray
    mean_risk: np.ndarray
    se_risk: np.ndarray
    xi_min: float
    xi_1se: float


def kfold_indices(n: int, folds: int, seed: int):
    """Seeded K-fold split; returns a list of test-index arrays."""
    if folds < 2:
        raise ConfigError("folds must be at least 2")
    if folds > n:
        raise ConfigError("more folds than observations")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


# ---------------------------------------------------------------------------
# linear lasso


def _linear_path_gram(X, y, lams, tol):
    n = X.shape[0]
    G = np.ascontiguousarray(X.T @ X / n)
    c = X.T @ y / n
    coefs, kkt, status = _kernels.lasso_path_gram(G, c, lams, tol, MAX_SWEEPS)
    return coefs, kkt, status


def lasso_linear(W, Y, xi1: float, standardize: bool = True) -> LassoFit:
    """Minimize (1/2n)||Y - W theta||^2 + xi1 ||theta||_1 by cyclic
    coordinate descent with warm starts along a short internal path.

    No intercept is fitted; with standardize=True columns are rescaled to
    unit mean square internally and coefficients mapped back.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    Y = np.ravel(np.asarray(Y, dtype=float))
    _check_finite(W, Y)
    if xi1 < 0:
        raise ConfigError("penalty must be nonnegative")
    n, p = W.shape
    if standardize:
        Xs, _, scale = _scale_columns(W, center=False)
    else:
        Xs, scale = np.asfortranarray(W), np.ones(p)
    lam_max = np.max(np.abs(Xs.T @ Y)) / n
    if xi1 >= lam_max or xi1 == 0:
        lams = np.array([xi1])
    else:
        lams = np.unique(np.geomspace(lam_max, xi1, 8))[::-1]
        lams[-1] = xi1
    coefs, kkt, mono, status = _kernels.lasso_path_resid(
        Xs, Y, lams, np.zeros(p), _FINAL_TOL, _KKT_TOL, MAX_SWEEPS, 0
    )
    if mono:
        raise NumericalError("objective increased during coordinate descent")
    theta_std = coefs[-1]
    theta = theta_std / scale
    resid = Y - Xs @ theta_std
    obj = 0.5 * np.mean(resid**2) + xi1 * np.sum(np.abs(theta_std))
    return LassoFit(
        coefficients=theta,
        intercept=0.0,
        penalty=float(xi1),
        objective=float(obj),
        iterations=len(lams),
        converged=status == _kernels.OK,
        kkt=float(kkt[-1]),
    )


# ---------------------------------------------------------------------------
# logistic lasso


def lasso_logistic(W, Y, xi1: float, standardize: bool = True) -> LassoFit:
    """Minimize (1/n) * Bernoulli negative log-likelihood + xi1||theta||_1
    with an unpenalized intercept, by iteratively reweighted least squares
    with inner coordinate descent.  Complete separation shows up as a
    diverging intercept; it is capped and flagged, not raised."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    Y = np.ravel(np.asarray(Y, dtype=float))
    _check_finite(W, Y)
    if not np.all(np.isin(Y, (0.0, 1.0))):
        raise ConfigError("logistic outcome must be 0/1")
    if xi1 < 0:
        raise ConfigError("penalty must be nonnegative")
    n, p = W.shape
    if standardize:
        Xs, mu, scale = _scale_columns(W, center=True)
    else:
        Xs, mu, scale = np.asfortranarray(W), np.zeros(p), np.ones(p)
    ybar = Y.mean()
    resid0 = Y - ybar
    lam_max = np.max(np.abs(Xs.T @ resid0)) / n
    if xi1 >= lam_max:
        lams = np.array([xi1])
    else:
        lams = np.unique(np.geomspace(max(lam_max, 1e-12), max(xi1, 1e-12), 8))[::-1]
        lams[-1] = xi1
    coefs, b0s, objs, kkts, mono, status, capped = _kernels.lasso_path_logistic(
        Xs, Y, lams, np.zeros(p), 0.0, _FINAL_TOL, 1e-7, MAX_SWEEPS, 200, _B0_CAP, True
    )
    if mono:
        raise NumericalError("objective increased during IRLS")
    theta_std = coefs[-1]
    theta = theta_std / scale
    intercept = float(b0s[-1] - mu @ theta)
    flags = ("intercept_capped",) if capped else ()
    return LassoFit(
        coefficients=theta,
        intercept=intercept,
        penalty=float(xi1),
        objective=float(objs[-1]),
        iterations=len(lams),
        converged=status == _kernels.OK,
        kkt=float(kkts[-1]),
        flags=flags,
    )


def logistic_objective(W, Y, theta, intercept, xi1) -> float:
    """(1/n) Bernoulli negative log-likelihood + xi1||theta||_1."""
    eta = intercept + W @ theta
    nll = np.mean(np.logaddexp(0.0, eta) - Y * eta)
    return float(nll + xi1 * np.sum(np.abs(theta)))


# ---------------------------------------------------------------------------
# Cox partial likelihood


def _cox_prepare(times, events):
    times = np.ravel(np.asarray(times, dtype=float))
    events = np.ravel(np.asarray(events)).astype(bool)
    if times.shape != events.shape:
        raise ConfigError("times and events must have equal length")
    if np.any(times <= 0):
        raise ConfigError("survival times must be positive")
    if not events.any():
        raise NumericalError("Cox fit requires at least one event")
    order = np.argsort(times, kind="stable")
    ts = times[order]
    # tie groups share a risk set (Breslow)
    starts = np.flatnonzero(np.concatenate(([True], ts[1:] != ts[:-1])))
    ev_sorted = events[order].astype(np.int64)
    group_events = np.add.reduceat(ev_sorted, starts)
    return order, starts.astype(np.int64), group_events


def cox_neg_log_partial_likelihood(theta, W, times, events):
    """Value and gradient of -(1/n) log Breslow partial likelihood.

    Pure numpy route, independent of the solver kernels; the gradient is
    -(1/n) W'(event - exp(eta) * cumhaz).
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    theta = np.ravel(np.asarray(theta, dtype=float))
    n = W.shape[0]
    order, group_start, group_events = _cox_prepare(times, events)
    Ws = W[order]
    ev = np.ravel(np.asarray(events)).astype(bool)[order]
    eta = Ws @ theta
    exp_eta = np.exp(eta)
    bounds = np.append(group_start, n)
    # suffix sums of exp(eta) over tie groups
    per_group = np.add.reduceat(exp_eta, group_start)
    S = np.cumsum(per_group[::-1])[::-1]
    d = group_events
    with np.errstate(divide="ignore"):
        log_S = np.log(S)
    loglik = eta[ev].sum() - (d * log_S).sum()
    haz_inc = d / S
    cum = np.cumsum(haz_inc)
    sizes = np.diff(bounds)
    cumhaz = np.repeat(cum, sizes)
    resid = ev.astype(float) - exp_eta * cumhaz
    # the sum over rows is order-free, so no back-permutation is needed
    grad = -(Ws.T @ resid) / n
    return float(-loglik / n), grad


def _cox_loglik_multi(W, times, events, thetas):
    """Breslow log partial likelihood for each coefficient row of thetas.

    Vectorized over the penalty path; the log partial likelihood is shift
    invariant in the linear predictor, so each column is centered at its max
    before exponentiating.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    order, group_start, group_events = _cox_prepare(times, events)
    Ws = W[order]
    ev = np.ravel(np.asarray(events)).astype(bool)[order]
    E = Ws @ thetas.T
    E = E - E.max(axis=0, keepdims=True)
    expE = np.exp(E)
    per_group = np.add.reduceat(expE, group_start, axis=0)
    S = np.cumsum(per_group[::-1], axis=0)[::-1]
    d = group_events.astype(float)
    with np.errstate(divide="ignore"):
        log_S = np.log(S)
    return E[ev].sum(axis=0) - d @ log_S


def lasso_cox(W, times, events, xi1: float, standardize: bool = True) -> LassoFit:
    """Minimize -(1/n) log Breslow partial likelihood + xi1||theta||_1 via
    quadratic approximation plus coordinate descent."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    _check_finite(W)
    if xi1 < 0:
        raise ConfigError("penalty must be nonnegative")
    n, p = W.shape
    order, group_start, group_events = _cox_prepare(times, events)
    ev_sorted = np.ravel(np.asarray(events)).astype(bool)[order]
    if standardize:
        Xs, _, scale = _scale_columns(W[order], center=True)
    else:
        Xs, scale = np.asfortranarray(W[order]), np.ones(p)
    _, cumhaz0, _ = _kernels.cox_eta_stats(
        np.zeros(n), ev_sorted, group_start, group_events
    )
    resid0 = ev_sorted.astype(float) - cumhaz0
    lam_max = np.max(np.abs(Xs.T @ resid0)) / n
    if xi1 >= lam_max:
        lams = np.array([xi1])
    else:
        lams = np.unique(np.geomspace(max(lam_max, 1e-12), max(xi1, 1e-12), 8))[::-1]
        lams[-1] = xi1
    coefs, objs, kkts, mono, status = _kernels.lasso_path_cox(
        Xs, ev_sorted, group_start, group_events, lams, np.zeros(p),
        _FINAL_TOL, 1e-7, MAX_SWEEPS, 200, True
    )
    if mono:
        raise NumericalError("objective increased during IRLS")
    theta = coefs[-1] / scale
    return LassoFit(
        coefficients=theta,
        intercept=0.0,
        penalty=float(xi1),
        objective=float(objs[-1]),
        iterations=len(lams),
        converged=status == _kernels.OK,
        kkt=float(kkts[-1]),
    )


# ---------------------------------------------------------------------------
# cross-validated lasso paths (the engine behind every CV-tuned fit)


def _fold_risks_linear(X, y, lams, test_sets, dfmax):
    n, p = X.shape
    risks = np.empty((len(test_sets), len(lams)))
    gram_mode = p <= n - max(len(t) for t in test_sets)
    if gram_mode:
        # one full Gram plus cheap per-fold downdates
        G_all = X.T @ X
        c_all = X.T @ y
    for k, test in enumerate(test_sets):
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        if gram_mode:
            Xte = X[test]
            n_tr = len(train)
            G_tr = (G_all - Xte.T @ Xte) / n_tr
            c_tr = (c_all - Xte.T @ y[test]) / n_tr
            scale = np.sqrt(np.clip(np.diag(G_tr), 1e-300, None))
            Gs = np.ascontiguousarray(G_tr / np.outer(scale, scale))
            cs = c_tr / scale
            coefs, _, _ = _kernels.lasso_path_gram(Gs, cs, lams, _FOLD_TOL, MAX_SWEEPS)
        else:
            Xs, _, scale = _scale_columns(X[train], center=False)
            coefs, _, _, _ = _kernels.lasso_path_resid(
                Xs, y[train], lams, np.zeros(p), _FOLD_TOL, np.inf, MAX_SWEEPS, dfmax
            )
        preds = X[test] @ (coefs / scale).T
        risks[k] = np.mean((y[test, None] - preds) ** 2, axis=0)
    return risks


def _fold_risks_logistic(X, y, lams, test_sets):
    n, p = X.shape
    risks = np.empty((len(test_sets), len(lams)))
    for k, test in enumerate(test_sets):
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        Xtr, ytr = X[train], y[train]
        Xs, mu, scale = _scale_columns(Xtr, center=True)
        coefs, b0s, _, _, _, _, _ = _kernels.lasso_path_logistic(
            Xs, ytr, lams, np.zeros(p), 0.0, _FOLD_TOL, np.inf, MAX_SWEEPS, 2, _B0_CAP, False
        )
        theta = coefs / scale
        icept = b0s - theta @ mu
        eta = X[test] @ theta.T + icept
        yte = y[test, None]
        dev = 2.0 * np.mean(np.logaddexp(0.0, eta) - yte * eta, axis=0)
        risks[k] = dev
    return risks


def _fold_risks_cox(X, times, events, lams, test_sets):
    """Verweij and Van Houwelingen difference convention: the fold risk is
    -2 [logPL_full(theta_k) - logPL_train(theta_k)], unscaled by n."""
    n, p = X.shape
    risks = np.empty((len(test_sets), len(lams)))
    for k, test in enumerate(test_sets):
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        o_tr, gs_tr, ge_tr = _cox_prepare(times[train], events[train])
        Xtr = X[train][o_tr]
        ev_tr = events[train][o_tr].astype(bool)
        Xs, mu, scale = _scale_columns(Xtr, center=True)
        coefs, _, _, _, _ = _kernels.lasso_path_cox(
            Xs, ev_tr, gs_tr, ge_tr, lams, np.zeros(p),
            _FOLD_TOL, np.inf, MAX_SWEEPS, 2, False
        )
        theta = coefs / scale
        ll_full = _cox_loglik_multi(X, times, events, theta)
        ll_tr = _cox_loglik_multi(X[train], times[train], events[train], theta)
        risks[k] = -2.0 * (ll_full - ll_tr)
    return risks


def _valid_folds(kind, outcome_arrays, test_sets, n):
    if kind == "logistic":
        y = outcome_arrays[0]
        for test in test_sets:
            train = np.setdiff1d(np.arange(n), test, assume_unique=True)
            if len(np.unique(y[train])) < 2:
                return False
    elif kind == "cox":
        events = outcome_arrays[1]
        for test in test_sets:
            train = np.setdiff1d(np.arange(n), test, assume_unique=True)
            if not events[train].any():
                return False
    return True


def _cv_curve(kind, X, outcome_arrays, grid, folds, seed, dfmax=0):
    n = X.shape[0]
    test_sets = kfold_indices(n, folds, seed)
    if not _valid_folds(kind, outcome_arrays, test_sets, n):
        logger.warning("degenerate fold encountered, reshuffling once")
        test_sets = kfold_indices(n, folds, child_rng(seed, 1).integers(2**31))
        if not _valid_folds(kind, outcome_arrays, test_sets, n):
            raise NumericalError("degenerate cross-validation folds")
    if kind == "linear":
        risks = _fold_risks_linear(X, outcome_arrays[0], grid, test_sets, dfmax)
    elif kind == "logistic":
        risks = _fold_risks_logistic(X, outcome_arrays[0], grid, test_sets)
    elif kind == "cox":
        risks = _fold_risks_cox(X, outcome_arrays[0], outcome_arrays[1], grid, test_sets)
    else:
        raise ConfigError(f"unknown fit family {kind!r}")
    mean_risk = risks.mean(axis=0)
    se_risk = risks.std(axis=0, ddof=1) / np.sqrt(folds)
    i_min = int(np.argmin(mean_risk))
    xi_min = float(grid[i_min])
    cap = mean_risk[i_min] + se_risk[i_min]
    ok = np.flatnonzero(mean_risk <= cap)
    xi_1se = float(grid[ok.min()])  # grid is decreasing, so first index is largest
    return CvResult(grid=np.asarray(grid), mean_risk=mean_risk, se_risk=se_risk,
                    xi_min=xi_min, xi_1se=xi_1se)


def _lam_max_for(kind, X, outcome_arrays):
    n = X.shape[0]
    if kind == "linear":
        Xs, _, _ = _scale_columns(X, center=False)
        return np.max(np.abs(Xs.T @ outcome_arrays[0])) / n
    if kind == "logistic":
        y = outcome_arrays[0]
        Xs, _, _ = _scale_columns(X, center=True)
        return np.max(np.abs(Xs.T @ (y - y.mean()))) / n
    if kind == "cox":
        times, events = outcome_arrays
        order, gs, ge = _cox_prepare(times, events)
        ev = events[order].astype(bool)
        Xs, _, _ = _scale_columns(X[order], center=True)
        _, cumhaz0, _ = _kernels.cox_eta_stats(np.zeros(n), ev, gs, ge)
        return np.max(np.abs(Xs.T @ (ev.astype(float) - cumhaz0))) / n
    raise ConfigError(f"unknown fit family {kind!r}")


def _outcome_arrays(kind, outcome: OutcomeVector):
    if kind == "cox":
        return (np.asarray(outcome.y), np.asarray(outcome.event))
    return (np.asarray(outcome.y),)


def _fit_kind(outcome: OutcomeVector) -> str:
    return {"continuous": "linear", "binary": "logistic", "survival": "cox"}[outcome.kind]


def cross_validate(fit_family: str, dataset, grid=None, folds: int = 10,
                   seed: int = 0, use_latent: bool = False) -> CvResult:
    """K-fold cross-validation of a lasso family over a penalty grid.

    fit_family is one of "linear", "logistic", "cox"; dataset is a
    ContaminatedDataset (or a bare (X, outcome) pair).  Risk is MSE for
    linear fits, mean Bernoulli deviance for logistic fits, and the
    partial-likelihood deviance difference for Cox fits.  Returns the risk
    curve with both xi_min and xi_1se.
    """
    if isinstance(dataset, ContaminatedDataset):
        X = dataset.x_latent if use_latent else dataset.W
        if X is None:
            raise ConfigError("dataset has no latent covariates")
        outcome = dataset.outcome
    else:
        X, outcome = dataset
    X = np.asarray(X, dtype=float)
    arrays = _outcome_arrays(fit_family, outcome)
    if grid is None:
        grid = penalty_grid(_lam_max_for(fit_family, X, arrays))
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) > 0):
        raise ConfigError("penalty grid must be decreasing")
    dfmax = 0 if X.shape[1] <= X.shape[0] else int(0.6 * X.shape[0])
    return _cv_curve(fit_family, X, arrays, grid, folds, seed, dfmax)


def cv_lasso_fit(X, outcome: OutcomeVector, rule: str = "1se", folds: int = 10,
                 seed: int = 0, grid=None):
    """CV-tuned lasso fit: full-data path, fold risk curve, certified refit
    at the selected penalty.  Returns (coefficients, intercept, CvResult)."""
    if rule not in ("min", "1se"):
        raise ConfigError("rule must be 'min' or '1se'")
    kind = _fit_kind(outcome)
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    arrays = _outcome_arrays(kind, outcome)
    if grid is None:
        grid = penalty_grid(_lam_max_for(kind, X, arrays))
    cv = _cv_curve(kind, X, arrays, grid, folds, seed,
                   dfmax=0 if p <= n else int(0.6 * n))
    xi = cv.xi_1se if rule == "1se" else cv.xi_min
    if kind == "linear":
        fit = lasso_linear(X, arrays[0], xi)
    elif kind == "logistic":
        fit = lasso_logistic(X, arrays[0], xi)
    else:
        fit = lasso_cox(X, arrays[0], arrays[1], xi)
    return fit.coefficients, fit.intercept, cv


# ---------------------------------------------------------------------------
# sparse group lasso for the spline designs


@dataclass
class SparseGroupLassoFit:
    """Solution of the sum-of-squares sparse group lasso.

    beta has one row per covariate group; group_norms are the euclidean norms
    of the rows, zero exactly for unselected groups.
    """

    beta: np.ndarray
    alpha: float
    kappa: float
    group_norms: np.ndarray
    kkt: float = np.nan
    objective: float = np.nan


def _sgl_blocks(Phi, group_size):
    n, P = Phi.shape
    if P % group_size:
        raise ConfigError("design width is not a multiple of the group size")
    ngroups = P // group_size
    starts = np.arange(0, P, group_size, dtype=np.int64)
    sizes = np.full(ngroups, group_size, dtype=np.int64)
    blocks = np.empty((ngroups, group_size, group_size))
    L = np.empty(ngroups)
    for g in range(ngroups):
        block = Phi[:, starts[g]:starts[g] + group_size]
        gram = block.T @ block
        blocks[g] = gram
        L[g] = 2.0 * max(np.linalg.eigvalsh(gram)[-1], 1e-12)
    return starts, sizes, blocks, L


def sgl_kappa_max(Phi, y, alpha, group_size):
    """Conservative upper bound on the penalty that zeroes every group."""
    P = Phi.shape[1]
    ngroups = P // group_size
    corr = 2.0 * np.abs(Phi.T @ y)
    bound = 0.0
    for g in range(ngroups):
        block = corr[g * group_size:(g + 1) * group_size]
        bound = max(bound, np.linalg.norm(block) / max(1.0 - alpha, 1e-12))
    return bound


def sparse_group_lasso_spline(Phi, Y, kappa: float, alpha: float = 0.05,
                              group_size: Optional[int] = None,
                              tol: float = 1e-8) -> SparseGroupLassoFit:
    """Minimize ||Yc - Phi beta||^2 + (1-alpha)*kappa*sum_j||beta_j||_2
    + alpha*kappa*sum|beta_jk| by blockwise proximal descent.

    Y is centered internally.  Groups are consecutive blocks of group_size
    columns (inferred as a square-ish block count if omitted is not
    possible, so group_size is effectively required for non-trivial designs).
    """
    Phi = np.asarray(Phi, dtype=float)
    Y = np.ravel(np.asarray(Y, dtype=float))
    if Phi.ndim != 2 or Phi.shape[0] != Y.shape[0]:
        raise ConfigError("design and outcome are not conformal")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError("alpha must lie in [0, 1]")
    if kappa < 0:
        raise ConfigError("penalty must be nonnegative")
    if group_size is None:
        group_size = Phi.shape[1]
    PhiF = np.asfortranarray(Phi)
    yc = Y - Y.mean()
    starts, sizes, blocks, L = _sgl_blocks(PhiF, group_size)
    coefs, kkts, objs, status = _kernels.sgl_path(
        PhiF, yc, starts, sizes, blocks, L, np.array([float(kappa)]), alpha,
        tol, 10_000, 50
    )
    beta = coefs[0].reshape(-1, group_size)
    norms = np.linalg.norm(beta, axis=1)
    return SparseGroupLassoFit(
        beta=beta, alpha=alpha, kappa=float(kappa), group_norms=norms,
        kkt=float(kkts[0]), objective=float(objs[0]),
    )


def cv_sparse_group_lasso(Phi, Y, alpha: float, group_size: int,
                          grid=None, folds: int = 10, seed: int = 0,
                          grid_length: int = 20, grid_ratio: float = 0.1,
                          rule: str = "min"):
    """CV over the sparse-group-lasso penalty; returns (fit, CvResult).

    The default grid follows the established convention for this estimator
    family: 20 log-spaced penalties down to a floor of 0.1 times the
    all-zero penalty."""
    Phi = np.asarray(Phi, dtype=float)
    Y = np.ravel(np.asarray(Y, dtype=float))
    n = Phi.shape[0]
    yc = Y - Y.mean()
    if grid is None:
        grid = penalty_grid(sgl_kappa_max(Phi, yc, alpha, group_size),
                            grid_length, grid_ratio)
    grid = np.asarray(grid, dtype=float)
    test_sets = kfold_indices(n, folds, seed)
    PhiF = np.asfortranarray(Phi)
    risks = np.empty((folds, len(grid)))
    for k, test in enumerate(test_sets):
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        Ptr = np.asfortranarray(Phi[train])
        ytr = yc[train] - yc[train].mean()
        starts, sizes, blocks, L = _sgl_blocks(Ptr, group_size)
        # fold penalties scale with the fold's sample size because the loss
        # is an unnormalized sum of squares
        fold_grid = grid * (len(train) / n)
        coefs, _, _, _ = _kernels.sgl_path(
            Ptr, ytr, starts, sizes, blocks, L, fold_grid, alpha, 1e-5, 2_000, 30
        )
        preds = Phi[test] @ coefs.T + yc[train].mean()
        risks[k] = np.mean((yc[test, None] - preds) ** 2, axis=0)
    mean_risk = risks.mean(axis=0)
    se_risk = risks.std(axis=0, ddof=1) / np.sqrt(folds)
    i_min = int(np.argmin(mean_risk))
    cap = mean_risk[i_min] + se_risk[i_min]
    ok = np.flatnonzero(mean_risk <= cap)
    cv = CvResult(grid=grid, mean_risk=mean_risk, se_risk=se_risk,
                  xi_min=float(grid[i_min]), xi_1se=float(grid[ok.min()]))
    kappa = cv.xi_1se if rule == "1se" else cv.xi_min
    starts, sizes, blocks, L = _sgl_blocks(PhiF, group_size)
    warm_grid = grid[grid >= kappa]
    if warm_grid.size == 0 or warm_grid[-1] != kappa:
        warm_grid = np.append(warm_grid, kappa)
    coefs, kkts, objs, _ = _kernels.sgl_path(
        PhiF, yc, starts, sizes, blocks, L, warm_grid, alpha, 1e-8, 10_000, 50
    )
    beta = coefs[-1].reshape(-1, group_size)
    fit = SparseGroupLassoFit(
        beta=beta, alpha=alpha, kappa=float(kappa),
        group_norms=np.linalg.norm(beta, axis=1),
        kkt=float(kkts[-1]), objective=float(objs[-1]),
    )
    return fit, cv


# ---------------------------------------------------------------------------
# corrected (measurement-error-adjusted) lasso


@dataclass
class CorrectedLassoFit:
    """First-order stationary point of the corrected squared-error loss on
    the l1 ball of the given radius."""

    coefficients: np.ndarray
    radius: float
    cv_loss: float = np.nan
    objective: float = np.nan


def project_l1(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the l1 ball by the sorting algorithm."""
    if radius < 0:
        raise ConfigError("radius must be nonnegative")
    v = np.asarray(v, dtype=float)
    if np.sum(np.abs(v)) <= radius:
        return v.copy()
    if radius == 0:
        return np.zeros_like(v)
    u = np.sort(np.abs(v))[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(v) + 1)
    rho = np.max(np.flatnonzero(u - (css - radius) / k > 0)) + 1
    tau = (css[rho - 1] - radius) / rho
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def corrected_loss(theta, W, Y, sigma_u):
    """L(theta) = ||Y - W theta||^2 - theta' Sigma_u theta and its gradient."""
    r = Y - W @ theta
    su_theta = sigma_u @ theta
    val = float(r @ r - theta @ su_theta)
    grad = -2.0 * (W.T @ r) - 2.0 * su_theta
    return val, grad


def _pgd_corrected(W, Y, sigma_u, radius, theta0, max_iter=5000, tol=1e-10):
    theta = project_l1(theta0, radius)
    val, grad = corrected_loss(theta, W, Y, sigma_u)
    t = 1.0 / max(np.linalg.norm(W, 2) ** 2 * 2.0, 1e-12)
    for _ in range(max_iter):
        t_try = t * 2.0
        while True:
            cand = project_l1(theta - t_try * grad, radius)
            step = cand - theta
            val_cand, grad_cand = corrected_loss(cand, W, Y, sigma_u)
            # sufficient decrease for the projected step
            if val_cand <= val + grad @ step + (0.5 / t_try) * (step @ step) + 1e-12:
                break
            t_try *= 0.5
            if t_try < 1e-18:
                cand, val_cand, grad_cand, step = theta, val, grad, np.zeros_like(theta)
                break
        move = np.max(np.abs(step)) if step.size else 0.0
        theta, val, grad, t = cand, val_cand, grad_cand, t_try
        if move < tol * max(1.0, np.max(np.abs(theta))):
            break
    return theta, val


def corrected_lasso(W, Y, sigma_u, radius: float, seed: int = 0,
                    restarts: int = 5) -> CorrectedLassoFit:
    """Minimize ||Y - W theta||^2 - theta' Sigma_u theta over the l1 ball of
    the given radius by projected gradient descent with backtracking.

    The loss can be non-convex, so a zero start plus seeded random restarts
    are run and the best objective kept.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    Y = np.ravel(np.asarray(Y, dtype=float))
    sigma_u = np.asarray(sigma_u, dtype=float)
    if radius < 0:
        raise ConfigError("radius must be nonnegative")
    p = W.shape[1]
    if radius == 0:
        return CorrectedLassoFit(coefficients=np.zeros(p), radius=0.0, objective=float(Y @ Y))
    rng = child_rng(seed, 777)
    best_theta, best_val = None, np.inf
    starts = [np.zeros(p)]
    for _ in range(restarts):
        v = rng.standard_normal(p)
        v *= radius * rng.random() / np.sum(np.abs(v))
        starts.append(v)
    for theta0 in starts:
        theta, val = _pgd_corrected(W, Y, sigma_u, radius, theta0)
        if val < best_val:
            best_theta, best_val = theta, val
    return CorrectedLassoFit(coefficients=best_theta, radius=float(radius),
                             objective=float(best_val))


def cv_corrected_lasso(W, Y, sigma_u, R_grid=None, folds: int = 10,
                       seed: int = 0) -> CorrectedLassoFit:
    """Choose the l1 radius by the corrected cross-validation loss
    L_CV(R) = sum_k ||Y_k - W_k theta_(k)||^2 - sum_k theta_(k)' Sigma_u theta_(k),
    then refit on the full data."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    Y = np.ravel(np.asarray(Y, dtype=float))
    sigma_u = np.asarray(sigma_u, dtype=float)
    n = W.shape[0]
    if R_grid is None:
        coef, _, _ = cv_lasso_fit(W, OutcomeVector("continuous", Y), rule="1se",
                                  seed=child_rng(seed, 3).integers(2**31))
        r_ref = max(np.sum(np.abs(coef)), 1e-3)
        R_grid = np.linspace(0.1 * r_ref, 2.5 * r_ref, 25)
    R_grid = np.asarray(R_grid, dtype=float)
    test_sets = kfold_indices(n, folds, seed)
    cv_losses = np.zeros(len(R_grid))
    for ir, R in enumerate(R_grid):
        total = 0.0
        for test in test_sets:
            train = np.setdiff1d(np.arange(n), test, assume_unique=True)
            fit = corrected_lasso(W[train], Y[train], sigma_u, R, seed=seed)
            r_te = Y[test] - W[test] @ fit.coefficients
            total += r_te @ r_te - fit.coefficients @ sigma_u @ fit.coefficients
        cv_losses[ir] = total
    best = int(np.argmin(cv_losses))
    final = corrected_lasso(W, Y, sigma_u, float(R_grid[best]), seed=seed)
    final.cv_loss = float(cv_losses[best])
    return final


def corrected_lasso_cv_curve(W, Y, sigma_u, R_grid, folds: int = 10, seed: int = 0):
    """The corrected cross-validation loss over an explicit radius grid."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    Y = np.ravel(np.asarray(Y, dtype=float))
    n = W.shape[0]
    test_sets = kfold_indices(n, folds, seed)
    out = np.zeros(len(R_grid))
    for ir, R in enumerate(R_grid):
        total = 0.0
        for test in test_sets:
            train = np.setdiff1d(np.arange(n), test, assume_unique=True)
            fit = corrected_lasso(W[train], Y[train], sigma_u, float(R), seed=seed)
            r_te = Y[test] - W[test] @ fit.coefficients
            total += r_te @ r_te - fit.coefficients @ sigma_u @ fit.coefficients
        out[ir] = total
    return out
