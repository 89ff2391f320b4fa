"""Simulation step: noise-augmented pseudodata, replicate fitting, averaging.

For each scale value in the grid, B pseudodatasets W + sqrt(scale) * U are
drawn with U rows i.i.d. N(0, Sigma_u), the CV-tuned naive estimator is fit
on each, and the replicate fits are averaged into one row of the solution
path.  Every (grid index, replicate) job derives its own seed from the
master seed, so the path is invariant to execution order.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .data import ContaminatedDataset, OutcomeVector
from .errors import ConfigError, NumericalError
from .seeds import child_seed
from .solvers import cv_lasso_fit

logger = logging.getLogger("simselex")


@dataclass(frozen=True)
class LambdaGrid:
    """Strictly increasing positive noise scales; at least three values so a
    quadratic trend is identifiable."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ravel(np.asarray(self.values, dtype=float))
        if v.shape[0] < 3:
            raise ConfigError("grid needs at least 3 values")
        if np.any(v <= 0):
            raise ConfigError("grid values must be positive")
        if np.any(np.diff(v) <= 0):
            raise ConfigError("grid values must be strictly increasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0]


def make_lambda_grid(m: int, lo: float, hi: float) -> LambdaGrid:
    """m equally spaced noise scales from lo to hi inclusive."""
    if m < 3:
        raise ConfigError("grid needs at least 3 values")
    if not 0 < lo < hi:
        raise ConfigError("need 0 < lo < hi")
    return LambdaGrid(np.linspace(lo, hi, m))


@dataclass
class SolutionPath:
    """B-averaged naive estimates across the noise grid.

    theta has one row per grid value; b_effective counts the replicates that
    actually entered each row's average after failures were skipped.
    """

    grid: LambdaGrid
    theta: np.ndarray
    b_replicates: int
    solver_tag: str
    b_effective: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.theta.shape[0] != self.grid.m:
            raise ConfigError("theta rows must match the grid")
        if not np.all(np.isfinite(self.theta)):
            raise NumericalError("non-finite entries in the solution path")
        if self.b_effective is None:
            self.b_effective = np.full(self.grid.m, self.b_replicates)


def _sigma_factor(sigma_u):
    """Symmetric PSD factor A with A A' = Sigma_u (eigen route, so rank
    deficient matrices are fine)."""
    sigma_u = np.asarray(sigma_u, dtype=float)
    scale = max(1.0, float(np.max(np.abs(sigma_u))))
    if np.max(np.abs(sigma_u - sigma_u.T)) > 1e-8 * scale:
        raise ConfigError("sigma_u must be symmetric")
    w, V = np.linalg.eigh(sigma_u)
    if w.min() < -1e-10 * scale:
        raise ConfigError("sigma_u must be positive semidefinite")
    return V * np.sqrt(np.clip(w, 0.0, None))


def pseudodata_fold_seed(Wb, master_seed: int) -> int:
    """Cross-validation fold seed derived from the pseudodata content.

    A pure function of (data, master seed): identical pseudodata produce
    identical fold splits (so a zero Sigma_u reproduces the plain naive fit
    exactly), while distinct pseudodata draw effectively independent splits,
    which averages fold-assignment noise out of the replicate means."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(Wb).tobytes())
    digest.update(int(master_seed).to_bytes(16, "little", signed=True))
    return int.from_bytes(digest.digest()[:8], "little") >> 1


def generate_pseudodata(W, sigma_u, lam: float, seed: int) -> np.ndarray:
    """W + sqrt(lam) * U with U rows i.i.d. N(0, Sigma_u); deterministic."""
    if lam < 0:
        raise ConfigError("noise scale must be nonnegative")
    W = np.atleast_2d(np.asarray(W, dtype=float))
    A = _sigma_factor(sigma_u)
    if lam == 0 or not A.any():
        return W.copy()
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal(W.shape)
    return W + np.sqrt(lam) * (Z @ A.T)


class CvLassoSolver:
    """CV-tuned naive lasso fit family, one per outcome kind.

    Instances are the base solver of the simulation step: calling fit
    returns the coefficient vector of the penalized fit on (X, outcome)
    with the penalty chosen by seeded K-fold cross-validation.
    """

    def __init__(self, kind: str, rule: str = "1se", folds: int = 10):
        if kind not in ("linear", "logistic", "cox"):
            raise ConfigError(f"unknown solver kind {kind!r}")
        if rule not in ("min", "1se"):
            raise ConfigError("rule must be 'min' or '1se'")
        self.kind = kind
        self.rule = rule
        self.folds = folds

    @property
    def tag(self) -> str:
        return f"cv-lasso-{self.kind}-{self.rule}"

    def coefficient_length(self, dataset: ContaminatedDataset) -> int:
        return dataset.p

    def fit(self, X, outcome: OutcomeVector, seed: int) -> np.ndarray:
        coef, _, _ = cv_lasso_fit(X, outcome, rule=self.rule, folds=self.folds, seed=seed)
        return coef


def simulation_step(dataset: ContaminatedDataset, grid: LambdaGrid, B: int,
                    base_solver, master_seed: int, threads: int = 1) -> SolutionPath:
    """Average B CV-tuned naive fits on pseudodata at every grid scale.

    Replicates that fail to fit are skipped and counted; more than 10%
    failures at any grid value is an error.  Seeds derive from
    (master_seed, grid index, replicate index), so results do not depend on
    the execution schedule.
    """
    if B < 1:
        raise ConfigError("B must be at least 1")
    outcome = dataset.outcome
    if outcome is None:
        raise ConfigError("dataset has no outcome")
    W = np.asarray(dataset.W, dtype=float)
    sigma_u = np.asarray(dataset.sigma_u, dtype=float)
    A = _sigma_factor(sigma_u)
    noise_free = not A.any()
    m = grid.m
    d = base_solver.coefficient_length(dataset)
    fits = np.full((m, B, d), np.nan)

    def run_job(im: int, b: int):
        lam = grid.values[im]
        seed = child_seed(master_seed, im, b)
        if noise_free:
            Wb = W
        else:
            rng = np.random.default_rng(seed)
            Wb = W + np.sqrt(lam) * (rng.standard_normal(W.shape) @ A.T)
        try:
            fits[im, b] = base_solver.fit(
                Wb, outcome, seed=pseudodata_fold_seed(Wb, master_seed))
        except NumericalError as exc:
            logger.warning("replicate (m=%d, b=%d) failed: %s", im, b, exc)

    jobs = [(im, b) for im in range(m) for b in range(B)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda ij: run_job(*ij), jobs))
    else:
        for im, b in jobs:
            run_job(im, b)

    theta = np.empty((m, d))
    b_eff = np.empty(m, dtype=int)
    for im in range(m):
        ok = ~np.isnan(fits[im, :, 0])
        b_eff[im] = int(ok.sum())
        if b_eff[im] < 0.9 * B:
            raise NumericalError(
                f"{B - b_eff[im]} of {B} replicates failed at grid value "
                f"{grid.values[im]:g}"
            )
        theta[im] = fits[im, ok].mean(axis=0)
        logger.info(
            "scale %.4g: mean nonzero count %.2f over %d replicates",
            grid.values[im],
            float(np.mean(np.count_nonzero(fits[im, ok], axis=1))),
            b_eff[im],
        )
    return SolutionPath(grid=grid, theta=theta, b_replicates=B,
                        solver_tag=base_solver.tag, b_effective=b_eff)


def _sparse_estimate_from(coef, provenance_tag):
    # imported lazily to avoid a module cycle with extrapolation
    from .extrapolation import SparseEstimate

    coef = np.asarray(coef, dtype=float)
    support = np.flatnonzero(coef)
    provenance = {int(j): {"selected_by": provenance_tag, "extrapolant": None,
                           "fit_rss": 0.0} for j in support}
    return SparseEstimate(coefficients=coef, support=frozenset(int(j) for j in support),
                          provenance=provenance)


def naive_fit(dataset: ContaminatedDataset, rule: str = "1se", folds: int = 10,
              seed: int = 0):
    """CV-tuned lasso on the observed covariates, ignoring measurement error."""
    outcome = dataset.outcome
    kind = {"continuous": "linear", "binary": "logistic", "survival": "cox"}[outcome.kind]
    solver = CvLassoSolver(kind, rule=rule, folds=folds)
    coef = solver.fit(np.asarray(dataset.W), outcome, seed=seed)
    return _sparse_estimate_from(coef, f"naive-{rule}")


def oracle_fit(dataset: ContaminatedDataset, rule: str = "1se", folds: int = 10,
               seed: int = 0):
    """CV-tuned lasso on the latent uncontaminated covariates."""
    if dataset.x_latent is None:
        raise ConfigError("oracle fit requires latent covariates")
    outcome = dataset.outcome
    kind = {"continuous": "linear", "binary": "logistic", "survival": "cox"}[outcome.kind]
    solver = CvLassoSolver(kind, rule=rule, folds=folds)
    coef = solver.fit(np.asarray(dataset.x_latent), outcome, seed=seed)
    return _sparse_estimate_from(coef, f"oracle-{rule}")
