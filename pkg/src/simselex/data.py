"""Dataset types, synthetic data generators, and microarray standardization.

The generators cover the four simulation designs used throughout the
experiment harness (linear, logistic, Cox survival, and additive spline
models with covariate measurement error) plus the posterior-summary
standardization pipeline for microarray data.  Every generator is a pure
function of its config, including the seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, ndtr

from .errors import ConfigError, NumericalError

logger = logging.getLogger("simselex")

_SYM_TOL = 1e-8
_PSD_TOL = 1e-10


def _as_readonly(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class OutcomeVector:
    """Model outcome: continuous, binary, or right-censored survival.

    For survival outcomes, y holds the observed time min(T, C) and event the
    indicator that the failure occurred before censoring.
    """

    kind: str
    y: np.ndarray
    event: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("continuous", "binary", "survival"):
            raise ConfigError(f"unknown outcome kind {self.kind!r}")
        object.__setattr__(self, "y", _as_readonly(np.ravel(self.y)))
        if self.kind == "binary":
            if not np.all(np.isin(self.y, (0.0, 1.0))):
                raise ConfigError("binary outcome must be 0/1")
            if self.event is not None:
                raise ConfigError("binary outcome cannot carry an event vector")
        elif self.kind == "survival":
            if self.event is None:
                raise ConfigError("survival outcome requires an event vector")
            ev = np.ravel(self.event).astype(bool)
            if ev.shape[0] != self.y.shape[0]:
                raise ConfigError("event vector length does not match y")
            if not np.all(self.y > 0):
                raise ConfigError("survival times must be positive")
            object.__setattr__(self, "event", _as_readonly(ev, dtype=bool))
        else:
            if self.event is not None:
                raise ConfigError("continuous outcome cannot carry an event vector")

    @property
    def n(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True)
class ContaminatedDataset:
    """Observed covariates W = X + U with known measurement-error covariance.

    x_latent holds the uncontaminated covariates when the data are synthetic
    (it enables the oracle fits); outcome may be omitted when only the
    covariate side of the dataset exists (microarray standardization builds
    the outcome-free part first).
    """

    W: np.ndarray
    outcome: Optional[OutcomeVector]
    sigma_u: np.ndarray
    x_latent: Optional[np.ndarray] = None

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        object.__setattr__(self, "W", _as_readonly(W))
        su = np.atleast_2d(np.asarray(self.sigma_u, dtype=float))
        n, p = W.shape
        if su.shape != (p, p):
            raise ConfigError(f"sigma_u must be {p}x{p}, got {su.shape}")
        scale = max(1.0, float(np.max(np.abs(su))))
        if np.max(np.abs(su - su.T)) > _SYM_TOL * scale:
            raise ConfigError("sigma_u must be symmetric")
        offdiag = su - np.diag(np.diag(su))
        if np.count_nonzero(offdiag):
            if np.linalg.eigvalsh(su).min() < -_PSD_TOL * scale:
                raise ConfigError("sigma_u must be positive semidefinite")
        elif np.diag(su).min() < -_PSD_TOL * scale:
            raise ConfigError("sigma_u must be positive semidefinite")
        object.__setattr__(self, "sigma_u", _as_readonly(su))
        if self.outcome is not None and self.outcome.n != n:
            raise ConfigError("outcome length does not match W")
        if self.x_latent is not None:
            xl = np.atleast_2d(np.asarray(self.x_latent, dtype=float))
            if xl.shape != (n, p):
                raise ConfigError("x_latent shape does not match W")
            object.__setattr__(self, "x_latent", _as_readonly(xl))

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def p(self) -> int:
        return self.W.shape[1]


def _check_counts(n: int, p: int):
    if p < 1:
        raise ConfigError("p must be at least 1")
    if n < 2:
        raise ConfigError("n must be at least 2")


@dataclass(frozen=True)
class LinearSimConfig:
    """Design for the linear errors-in-variables simulation.

    Covariates are N(0, Sigma) with Sigma_ij = rho^|i-j|; measurement error
    is N(0, sigma_u_scalar^2 I); residual noise is N(0, sigma_eps^2).
    """

    n: int
    p: int
    rho: float
    sigma_u_scalar: float
    sigma_eps: float
    theta: np.ndarray
    seed: int

    def __post_init__(self):
        _check_counts(self.n, self.p)
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError("rho must be in [0, 1)")
        if self.sigma_u_scalar < 0 or self.sigma_eps < 0:
            raise ConfigError("noise scales must be nonnegative")
        th = _as_readonly(np.ravel(self.theta))
        if th.shape[0] != self.p:
            raise ConfigError("theta must have length p")
        object.__setattr__(self, "theta", th)


@dataclass(frozen=True)
class CoxSimConfig:
    """Design for the Cox survival simulation.

    Failure times come from a Weibull baseline hazard
    h0(t) = weibull_scale * weibull_shape * t^(weibull_shape - 1) with
    multiplicative covariate effect exp(x'theta); censoring times are
    exponential with rate censor_rate.
    """

    n: int
    p: int
    rho: float
    sigma_u_scalar: float
    theta: np.ndarray
    seed: int
    weibull_shape: float = 1.0
    weibull_scale: float = 0.01
    censor_rate: float = 0.001

    def __post_init__(self):
        _check_counts(self.n, self.p)
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError("rho must be in [0, 1)")
        if self.sigma_u_scalar < 0:
            raise ConfigError("noise scales must be nonnegative")
        if self.weibull_shape <= 0 or self.weibull_scale <= 0 or self.censor_rate <= 0:
            raise ConfigError("Weibull and censoring rates must be positive")
        th = _as_readonly(np.ravel(self.theta))
        if th.shape[0] != self.p:
            raise ConfigError("theta must have length p")
        object.__setattr__(self, "theta", th)


@dataclass(frozen=True)
class SplineSimConfig:
    """Design for the additive spline simulation.

    Latent covariates come from a Gaussian copula with AR correlation
    rho^|i-j| and marginals rescaled to be uniform on marginal_range.
    """

    n: int
    p: int
    rho: float = 0.25
    sigma_u_sq: float = 0.15
    marginal_range: tuple = (-3.0, 3.0)
    seed: int = 0

    def __post_init__(self):
        _check_counts(self.n, self.p)
        if self.p < 4:
            raise ConfigError("spline design needs p >= 4")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError("rho must be in [0, 1)")
        if self.sigma_u_sq < 0:
            raise ConfigError("sigma_u_sq must be nonnegative")
        lo, hi = self.marginal_range
        if not lo < hi:
            raise ConfigError("marginal_range must be a nonempty interval")


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    """AR(1)-structured covariance with entries rho^|i-j|."""
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :]) if rho != 0 else np.eye(p)


def _draw_latent(rng, n, p, rho):
    Z = rng.standard_normal((n, p))
    if rho == 0:
        return Z
    L = np.linalg.cholesky(ar1_covariance(p, rho))
    return Z @ L.T


def generate_linear_dataset(cfg: LinearSimConfig) -> ContaminatedDataset:
    """Y = X theta + eps with W = X + U; deterministic given cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    X = _draw_latent(rng, cfg.n, cfg.p, cfg.rho)
    U = cfg.sigma_u_scalar * rng.standard_normal((cfg.n, cfg.p))
    eps = cfg.sigma_eps * rng.standard_normal(cfg.n)
    y = X @ cfg.theta + eps
    return ContaminatedDataset(
        W=X + U,
        outcome=OutcomeVector("continuous", y),
        sigma_u=cfg.sigma_u_scalar**2 * np.eye(cfg.p),
        x_latent=X,
    )


def generate_logistic_dataset(cfg: LinearSimConfig) -> ContaminatedDataset:
    """Bernoulli outcome with logit(p_i) = x_i'theta; covariates as in the
    linear generator (sigma_eps is ignored)."""
    rng = np.random.default_rng(cfg.seed)
    X = _draw_latent(rng, cfg.n, cfg.p, cfg.rho)
    U = cfg.sigma_u_scalar * rng.standard_normal((cfg.n, cfg.p))
    prob = expit(X @ cfg.theta)
    y = (rng.random(cfg.n) < prob).astype(float)
    return ContaminatedDataset(
        W=X + U,
        outcome=OutcomeVector("binary", y),
        sigma_u=cfg.sigma_u_scalar**2 * np.eye(cfg.p),
        x_latent=X,
    )


def generate_cox_dataset(cfg: CoxSimConfig) -> ContaminatedDataset:
    """Weibull failure times with hazard multiplier exp(x'theta), exponential
    censoring; y = min(T, C), event = (T < C)."""
    rng = np.random.default_rng(cfg.seed)
    X = _draw_latent(rng, cfg.n, cfg.p, cfg.rho)
    U = cfg.sigma_u_scalar * rng.standard_normal((cfg.n, cfg.p))
    V = rng.random(cfg.n)
    # inverse transform through the Weibull cumulative hazard
    T = (-np.log(V) / (cfg.weibull_scale * np.exp(X @ cfg.theta))) ** (1.0 / cfg.weibull_shape)
    C = rng.exponential(1.0 / cfg.censor_rate, cfg.n)
    y = np.minimum(T, C)
    event = T < C
    return ContaminatedDataset(
        W=X + U,
        outcome=OutcomeVector("survival", y, event),
        sigma_u=cfg.sigma_u_scalar**2 * np.eye(cfg.p),
        x_latent=X,
    )


def spline_f1(t):
    return 3.0 * np.sin(2.0 * t) + np.sin(t)


def spline_f2(t):
    return 3.0 * np.cos(2.0 * np.pi * t / 3.0) + t


def spline_f3(t):
    return (1.0 - t) ** 2 - 4.0


def spline_f4(t):
    return 3.0 * t


def spline_true_component(j: int, t):
    """True additive component for covariate j (0-based); zero for j >= 4."""
    if j == 0:
        return spline_f1(t)
    if j == 1:
        return spline_f2(t)
    if j == 2:
        return spline_f3(t)
    if j == 3:
        return spline_f4(t)
    return np.zeros_like(np.asarray(t, dtype=float))


def generate_spline_dataset(cfg: SplineSimConfig) -> ContaminatedDataset:
    """Additive model over copula-uniform covariates.

    Y = f1(X_1) + ... + f4(X_4) + eps with eps standard normal; the remaining
    components are identically zero.  Latent X has uniform marginals on
    marginal_range obtained by transforming AR-correlated Gaussians through
    the normal CDF.
    """
    rng = np.random.default_rng(cfg.seed)
    Z = _draw_latent(rng, cfg.n, cfg.p, cfg.rho)
    lo, hi = cfg.marginal_range
    X = lo + (hi - lo) * ndtr(Z)
    U = np.sqrt(cfg.sigma_u_sq) * rng.standard_normal((cfg.n, cfg.p))
    y = spline_f1(X[:, 0]) + spline_f2(X[:, 1]) + spline_f3(X[:, 2]) + spline_f4(X[:, 3])
    y = y + rng.standard_normal(cfg.n)
    return ContaminatedDataset(
        W=X + U,
        outcome=OutcomeVector("continuous", y),
        sigma_u=cfg.sigma_u_sq * np.eye(cfg.p),
        x_latent=X,
    )


def standardize_microarray(mu_hat, var_hat, nsr_cutoff, outcome: Optional[OutcomeVector] = None):
    """Standardize posterior-mean expression levels and filter noisy genes.

    Per gene j, W_ij = (mu_ij - mean_j) / sd_j with the divisor-n variance,
    the measurement-error variance is the average posterior variance
    rescaled by 1/sd_j^2, and the gene is kept only when its error variance
    is strictly below nsr_cutoff times its total variance.  Genes with zero
    variance are dropped and reported in the log.

    Returns (dataset, kept_indices) where kept_indices are original column
    indices of the retained genes.
    """
    mu_hat = np.atleast_2d(np.asarray(mu_hat, dtype=float))
    var_hat = np.atleast_2d(np.asarray(var_hat, dtype=float))
    if mu_hat.shape != var_hat.shape:
        raise ConfigError("posterior mean and variance matrices must have equal shape")
    if np.any(var_hat < 0):
        raise ConfigError("posterior variances must be nonnegative")
    n, p = mu_hat.shape
    col_mean = mu_hat.mean(axis=0)
    col_var = ((mu_hat - col_mean) ** 2).mean(axis=0)
    err_var = var_hat.mean(axis=0)

    zero_var = col_var == 0.0
    if np.any(zero_var):
        logger.warning(
            "dropping %d zero-variance gene(s): %s",
            int(zero_var.sum()),
            np.flatnonzero(zero_var).tolist(),
        )
    keep = (~zero_var) & (err_var < nsr_cutoff * col_var)
    kept_indices = np.flatnonzero(keep)
    sd = np.sqrt(col_var[keep])
    W = (mu_hat[:, keep] - col_mean[keep]) / sd
    nsr = err_var[keep] / col_var[keep]
    dataset = ContaminatedDataset(W=W, outcome=outcome, sigma_u=np.diag(nsr))
    return dataset, kept_indices


def delta_v(sigma, sigma_u) -> float:
    """Proportional increase of total covariate variability caused by
    measurement error: (det(Sigma + Sigma_u) - det(Sigma)) / det(Sigma),
    evaluated through log-determinants."""
    sigma = np.asarray(sigma, dtype=float)
    sigma_u = np.asarray(sigma_u, dtype=float)
    sign_w, logdet_w = np.linalg.slogdet(sigma + sigma_u)
    sign_x, logdet_x = np.linalg.slogdet(sigma)
    if sign_x <= 0 or not np.isfinite(logdet_x):
        raise NumericalError("Sigma must be positive definite")
    if sign_w <= 0:
        raise NumericalError("Sigma + Sigma_u must be positive definite")
    return float(np.expm1(logdet_w - logdet_x))
