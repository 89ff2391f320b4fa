"""Extrapolation step: per-coefficient trend fits evaluated at scale -1.

Each selected coefficient's path over the noise grid is fit, unpenalized,
with a linear, quadratic, or nonlinear-means trend and evaluated at -1, the
scale at which the total measurement error vanishes.  Deselected coordinates
stay exactly zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import ConfigError, NumericalError
from .simex import SolutionPath

logger = logging.getLogger("simselex")

KINDS = ("linear", "quadratic", "nonlinear_means")
_MIN_POINTS = {"linear": 2, "quadratic": 3, "nonlinear_means": 4}


@dataclass
class ExtrapolationModel:
    """Fitted trend for one coefficient path.

    params is (g0, g1) for linear, (g0, g1, g2) for quadratic, and
    (g0, g1, g2) for the nonlinear means model g0 + g1 / (g2 + s).
    """

    kind: str
    params: tuple
    fit_rss: float
    fallback_from: str = None


def _poly_fit(lambdas, values, degree):
    V = np.vander(lambdas, degree + 1, increasing=True)
    coef, _, rank, _ = np.linalg.lstsq(V, values, rcond=None)
    if rank < degree + 1:
        raise NumericalError("singular design in trend fit")
    rss = float(((values - V @ coef) ** 2).sum())
    return tuple(float(c) for c in coef), rss


def _nonlinear_means_fit(lambdas, values):
    """Nonlinear means trend g0 + g1/(g2 + s) by least squares.

    Initialization: pin g2 = 1.5 (outside the pole range of the grid and of
    the evaluation point -1), solve the then-linear (g0, g1) by least
    squares, then refine all three jointly."""
    g2_0 = 1.5
    basis = np.column_stack([np.ones_like(lambdas), 1.0 / (g2_0 + lambdas)])
    lin = np.linalg.lstsq(basis, values, rcond=None)[0]
    start = np.array([lin[0], lin[1], g2_0])

    def resid(params):
        g0, g1, g2 = params
        den = g2 + lambdas
        den = np.where(np.abs(den) < 1e-12, 1e-12, den)
        return g0 + g1 / den - values

    sol = least_squares(resid, start, method="lm", xtol=1e-14, ftol=1e-14, max_nfev=2000)
    params = tuple(float(v) for v in sol.x)
    rss = float((sol.fun**2).sum())
    converged = sol.success and np.all(np.isfinite(sol.x))
    g2 = params[2]
    pole_in_grid = np.any(np.abs(g2 + lambdas) < 1e-9)
    pole_at_target = abs(g2 - 1.0) < 1e-6
    return params, rss, converged and not pole_in_grid and not pole_at_target


def fit_extrapolant(lambdas, values, kind: str = "quadratic") -> ExtrapolationModel:
    """Unpenalized trend fit of one coefficient path.

    A nonconvergent nonlinear-means fit falls back to the quadratic trend and
    records that in the returned model."""
    if kind not in KINDS:
        raise ConfigError(f"unknown extrapolant kind {kind!r}")
    lambdas = np.ravel(np.asarray(lambdas, dtype=float))
    values = np.ravel(np.asarray(values, dtype=float))
    if lambdas.shape != values.shape:
        raise ConfigError("grid and values must have equal length")
    if lambdas.shape[0] < _MIN_POINTS[kind]:
        raise ConfigError(f"{kind} trend needs at least {_MIN_POINTS[kind]} points")
    if kind == "linear":
        params, rss = _poly_fit(lambdas, values, 1)
        return ExtrapolationModel(kind="linear", params=params, fit_rss=rss)
    if kind == "quadratic":
        params, rss = _poly_fit(lambdas, values, 2)
        return ExtrapolationModel(kind="quadratic", params=params, fit_rss=rss)
    params, rss, ok = _nonlinear_means_fit(lambdas, values)
    if ok:
        return ExtrapolationModel(kind="nonlinear_means", params=params, fit_rss=rss)
    qparams, qrss = _poly_fit(lambdas, values, 2)
    logger.info("nonlinear-means fit did not converge; quadratic fallback used")
    return ExtrapolationModel(kind="quadratic", params=qparams, fit_rss=qrss,
                              fallback_from="nonlinear_means")


def extrapolate(model: ExtrapolationModel) -> float:
    """Evaluate a fitted trend at scale -1."""
    if model.kind == "linear":
        g0, g1 = model.params
        return float(g0 - g1)
    if model.kind == "quadratic":
        g0, g1, g2 = model.params
        return float(g0 - g1 + g2)
    if model.kind == "nonlinear_means":
        g0, g1, g2 = model.params
        if abs(g2 - 1.0) < 1e-6:
            raise NumericalError(
                f"nonlinear-means trend has a pole at -1 (g2 = {g2:.8g})"
            )
        return float(g0 + g1 / (g2 - 1.0))
    raise ConfigError(f"unknown extrapolant kind {model.kind!r}")


@dataclass
class SparseEstimate:
    """Final sparse coefficient vector with explicit support and per-index
    provenance (how it was selected, which trend, and the trend's rss)."""

    coefficients: np.ndarray
    support: frozenset
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)

    @property
    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.coefficients))


def simselex_assemble(path: SolutionPath, selected, kind: str = "quadratic") -> SparseEstimate:
    """Extrapolate each selected coefficient path to -1; zeros elsewhere."""
    theta = np.asarray(path.theta, dtype=float)
    p = theta.shape[1]
    selected = sorted(int(j) for j in selected)
    if selected and (selected[0] < 0 or selected[-1] >= p):
        raise ConfigError("selected indices out of range")
    coef = np.zeros(p)
    provenance = {}
    lambdas = path.grid.values
    for j in selected:
        model = fit_extrapolant(lambdas, theta[:, j], kind)
        coef[j] = extrapolate(model)
        provenance[j] = {
            "selected_by": "group-lasso",
            "extrapolant": model.kind,
            "fit_rss": model.fit_rss,
            "fallback_from": model.fallback_from,
        }
    return SparseEstimate(coefficients=coef,
                          support=frozenset(selected),
                          provenance=provenance)
