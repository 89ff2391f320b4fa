"""Experiment orchestration: replicate loops, metrics, and table emission.

Reproduces the benchmark tables at configurable scale.  Every replicate
derives its dataset seed from the experiment seed, estimator failures are
recorded per replicate (the row is reported with a reduced effective count),
and the metrics CSV is a deterministic function of the config; wall-clock
timings go to a separate sidecar file so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .data import (ContaminatedDataset, CoxSimConfig, LinearSimConfig,
                   SplineSimConfig, generate_cox_dataset, generate_linear_dataset,
                   generate_logistic_dataset, generate_spline_dataset,
                   spline_true_component)
from .errors import ConfigError, NumericalError
from .extrapolation import simselex_assemble
from .pipeline import simex_noselect_fit, simselex_fit
from .seeds import child_seed
from .selection import build_design, cv_select_xi2, group_lasso_paths
from .simex import make_lambda_grid, naive_fit, oracle_fit
from .solvers import cv_corrected_lasso
from .splines import fit_additive, mise, simselex_spline

logger = logging.getLogger("simselex")

THETA_PATTERNS = {
    "theta1": (1.0, 1.0, 1.0, 1.0, 1.0),
    "theta2-linear": (1.0, 1 / 2, 1 / 3, 1 / 4, 1 / 5),
    "theta2-glm": (2.0, 1.75, 1.5, 1.25, 1.0),
}

KNOWN_ESTIMATORS = ("true", "naive", "simselex", "simex_noselect", "corrected_lasso")


def l2_error(est, truth) -> float:
    """Euclidean distance between estimated and true coefficient vectors."""
    est = np.ravel(np.asarray(est, dtype=float))
    truth = np.ravel(np.asarray(truth, dtype=float))
    if est.shape != truth.shape:
        raise ConfigError("vectors must have equal length")
    return float(np.sqrt(np.sum((est - truth) ** 2)))


def fp_fn(est, truth):
    """False positive and false negative counts; nonzero means exactly
    nonzero (the sparse estimators produce exact zeros)."""
    est = np.ravel(np.asarray(est, dtype=float))
    truth = np.ravel(np.asarray(truth, dtype=float))
    if est.shape != truth.shape:
        raise ConfigError("vectors must have equal length")
    fp = int(np.sum((est != 0) & (truth == 0)))
    fn = int(np.sum((est == 0) & (truth != 0)))
    return fp, fn


@dataclass
class ExperimentConfig:
    """One benchmark run: a model design, a set of estimators, and scale."""

    model: str
    n: int = 300
    p: int = 100
    rho: float = 0.25
    sigma_u: float = 0.45        # measurement-error SD (parametric models)
    sigma_eps: float = 0.128
    theta: tuple = THETA_PATTERNS["theta1"]
    weibull_shape: float = 1.0
    weibull_scale: float = 0.01
    censor_rate: float = 0.001
    sigma_u_sq: float = 0.15     # measurement-error variance (spline model)
    estimators: tuple = ("true", "naive", "simselex")
    replicates: int = 50
    b: int = 100
    m: int = 5
    grid_lo: float = 0.01
    grid_hi: float = 2.0
    rule: str = "1se"
    extrapolant: str = "quadratic"
    selection_variant: str = "l2norm"
    cv_per_pseudodataset: bool = False
    knots: int = 6
    alpha: float = 0.05
    folds: int = 10
    seed: int = 2026
    threads: int = 1

    def __post_init__(self):
        if self.model not in ("linear", "logistic", "cox", "spline"):
            raise ConfigError(f"unknown model {self.model!r}")
        if not self.estimators:
            raise ConfigError("estimator list must be nonempty")
        for est in self.estimators:
            if est not in KNOWN_ESTIMATORS:
                raise ConfigError(f"unknown estimator {est!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")

    def config_hash(self) -> str:
        payload = asdict(self)
        payload.pop("threads")   # execution detail, not part of the design
        payload = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def full_theta(self) -> np.ndarray:
        theta = np.zeros(self.p)
        lead = np.asarray(self.theta, dtype=float)
        if lead.shape[0] > self.p:
            raise ConfigError("theta longer than p")
        theta[: lead.shape[0]] = lead
        return theta


@dataclass
class MetricsRow:
    """Aggregated metrics for one estimator; the se columns hold the sample
    standard deviation across replicates (divisor N-1)."""

    estimator: str
    l2_mean: float = np.nan
    l2_se: float = np.nan
    fp_mean: float = np.nan
    fp_se: float = np.nan
    fn_mean: float = np.nan
    fn_se: float = np.nan
    mise_mean: float = np.nan
    mise_se: float = np.nan
    n_effective: int = 0
    runtime_sec: float = np.nan


def _generate(cfg: ExperimentConfig, r: int) -> ContaminatedDataset:
    seed = child_seed(cfg.seed, r)
    if cfg.model == "linear":
        return generate_linear_dataset(LinearSimConfig(
            n=cfg.n, p=cfg.p, rho=cfg.rho, sigma_u_scalar=cfg.sigma_u,
            sigma_eps=cfg.sigma_eps, theta=cfg.full_theta(), seed=seed))
    if cfg.model == "logistic":
        return generate_logistic_dataset(LinearSimConfig(
            n=cfg.n, p=cfg.p, rho=cfg.rho, sigma_u_scalar=cfg.sigma_u,
            sigma_eps=0.0, theta=cfg.full_theta(), seed=seed))
    if cfg.model == "cox":
        return generate_cox_dataset(CoxSimConfig(
            n=cfg.n, p=cfg.p, rho=cfg.rho, sigma_u_scalar=cfg.sigma_u,
            theta=cfg.full_theta(), seed=seed, weibull_shape=cfg.weibull_shape,
            weibull_scale=cfg.weibull_scale, censor_rate=cfg.censor_rate))
    return generate_spline_dataset(SplineSimConfig(
        n=cfg.n, p=cfg.p, rho=cfg.rho, sigma_u_sq=cfg.sigma_u_sq, seed=seed))


def _run_parametric_estimator(cfg, name, dataset, r):
    grid = make_lambda_grid(cfg.m, cfg.grid_lo, cfg.grid_hi)
    seed = child_seed(cfg.seed, r, KNOWN_ESTIMATORS.index(name))
    # true and naive share one fold split per replicate, so they coincide
    # exactly when there is no measurement error
    plain_seed = child_seed(cfg.seed, r, 100)
    if name == "true":
        return oracle_fit(dataset, rule=cfg.rule, folds=cfg.folds,
                          seed=plain_seed).coefficients
    if name == "naive":
        return naive_fit(dataset, rule=cfg.rule, folds=cfg.folds,
                         seed=plain_seed).coefficients
    if name == "simselex":
        est, _ = simselex_fit(dataset, grid=grid, B=cfg.b, rule=cfg.rule,
                              extrapolant=cfg.extrapolant, folds=cfg.folds,
                              seed=seed, threads=cfg.threads)
        return est.coefficients
    if name == "simex_noselect":
        est, _ = simex_noselect_fit(dataset, grid=grid, B=cfg.b, rule=cfg.rule,
                                    extrapolant=cfg.extrapolant, folds=cfg.folds,
                                    seed=seed, threads=cfg.threads)
        return est.coefficients
    if name == "corrected_lasso":
        if cfg.model != "linear":
            raise ConfigError("corrected_lasso applies to the linear model only")
        fit = cv_corrected_lasso(np.asarray(dataset.W),
                                 np.asarray(dataset.outcome.y),
                                 np.asarray(dataset.sigma_u),
                                 folds=cfg.folds, seed=seed)
        return fit.coefficients
    raise ConfigError(f"unknown estimator {name!r}")


def _run_spline_estimator(cfg, name, dataset, r):
    """Returns (selected set, mise value)."""
    grid = make_lambda_grid(cfg.m, cfg.grid_lo, cfg.grid_hi)
    seed = child_seed(cfg.seed, r, KNOWN_ESTIMATORS.index(name))
    if name == "true":
        fit = fit_additive(dataset, alpha=cfg.alpha, use_latent=True,
                           K=cfg.knots, folds=cfg.folds, seed=seed)
    elif name == "naive":
        fit = fit_additive(dataset, alpha=cfg.alpha, use_latent=False,
                           K=cfg.knots, folds=cfg.folds, seed=seed)
    elif name == "simselex":
        fit, _ = simselex_spline(dataset, grid=grid, B=cfg.b,
                                 selection_variant=cfg.selection_variant,
                                 kind=cfg.extrapolant, alpha=cfg.alpha,
                                 K=cfg.knots, folds=cfg.folds, seed=seed,
                                 cv_per_pseudodataset=cfg.cv_per_pseudodataset,
                                 threads=cfg.threads)
    else:
        raise ConfigError(f"estimator {name!r} does not apply to the spline model")
    value = mise(fit, lambda j: (lambda x, j=j: spline_true_component(j, x)))
    return fit.selected, value


def run_experiment(cfg: ExperimentConfig, out_path: Optional[str] = None):
    """Run every estimator over the replicate loop and aggregate metrics.

    Returns a list of MetricsRow.  With out_path set, writes the metrics CSV
    (deterministic) plus a '<out_path>.timings.csv' sidecar with wall-clock
    seconds per estimator.
    """
    truth = cfg.full_theta() if cfg.model != "spline" else None
    true_support = set(range(4)) if cfg.model == "spline" else None
    per_est = {name: {"l2": [], "fp": [], "fn": [], "mise": []}
               for name in cfg.estimators}
    runtimes = {name: 0.0 for name in cfg.estimators}
    for r in range(cfg.replicates):
        dataset = _generate(cfg, r)
        for name in cfg.estimators:
            t0 = time.perf_counter()
            try:
                if cfg.model == "spline":
                    selected, value = _run_spline_estimator(cfg, name, dataset, r)
                    fp = len(selected - true_support)
                    fn = len(true_support - selected)
                    per_est[name]["mise"].append(value)
                    per_est[name]["fp"].append(fp)
                    per_est[name]["fn"].append(fn)
                else:
                    coef = _run_parametric_estimator(cfg, name, dataset, r)
                    per_est[name]["l2"].append(l2_error(coef, truth))
                    fp, fn = fp_fn(coef, truth)
                    per_est[name]["fp"].append(fp)
                    per_est[name]["fn"].append(fn)
            except NumericalError as exc:
                logger.warning("replicate %d estimator %s failed: %s", r, name, exc)
            runtimes[name] += time.perf_counter() - t0
        logger.info("replicate %d/%d done", r + 1, cfg.replicates)

    rows = []
    for name in cfg.estimators:
        vals = per_est[name]
        row = MetricsRow(estimator=name, n_effective=len(vals["fp"]),
                         runtime_sec=runtimes[name])
        if vals["l2"]:
            row.l2_mean = float(np.mean(vals["l2"]))
            row.l2_se = float(np.std(vals["l2"], ddof=1)) if len(vals["l2"]) > 1 else 0.0
        if vals["mise"]:
            row.mise_mean = float(np.mean(vals["mise"]))
            row.mise_se = float(np.std(vals["mise"], ddof=1)) if len(vals["mise"]) > 1 else 0.0
        if vals["fp"]:
            row.fp_mean = float(np.mean(vals["fp"]))
            row.fp_se = float(np.std(vals["fp"], ddof=1)) if len(vals["fp"]) > 1 else 0.0
            row.fn_mean = float(np.mean(vals["fn"]))
            row.fn_se = float(np.std(vals["fn"], ddof=1)) if len(vals["fn"]) > 1 else 0.0
        rows.append(row)

    if out_path:
        write_metrics_csv(out_path, rows, cfg)
        write_timings_csv(f"{out_path}.timings.csv", rows)
    return rows


_METRIC_COLUMNS = ["estimator", "l2_mean", "l2_se", "fp_mean", "fp_se",
                   "fn_mean", "fn_se", "mise_mean", "mise_se", "n_effective"]


def _fmt(x) -> str:
    if isinstance(x, float):
        return "" if np.isnan(x) else format(x, ".10g")
    return str(x)


def write_metrics_csv(path: str, rows, cfg: ExperimentConfig) -> None:
    """Deterministic metrics table; the header comment carries the config
    hash so every row is traceable to its configuration."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# config {cfg.config_hash()}\n")
        writer = csv.writer(fh)
        writer.writerow(_METRIC_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, c)) for c in _METRIC_COLUMNS])


def write_timings_csv(path: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["estimator", "runtime_sec"])
        for row in rows:
            writer.writerow([row.estimator, format(row.runtime_sec, ".3f")])


def simex_failure_demo(cfg: ExperimentConfig, seeds: int = 1):
    """Side-by-side nonzero counts with and without the selection stage.

    Runs the no-selection estimator (every coordinate extrapolated), the
    naive fit, and the selected fit on the same datasets; reports, per seed,
    the no-selection nonzero count, how many of those exceed 0.001 in
    absolute value, and the naive and selected counts.
    """
    report = []
    grid = make_lambda_grid(cfg.m, cfg.grid_lo, cfg.grid_hi)
    for r in range(seeds):
        dataset = _generate(cfg, r)
        seed = child_seed(cfg.seed, r, 10)
        naive = naive_fit(dataset, rule=cfg.rule, folds=cfg.folds, seed=seed)
        noselect, diag = simex_noselect_fit(dataset, grid=grid, B=cfg.b,
                                            rule=cfg.rule, folds=cfg.folds,
                                            extrapolant=cfg.extrapolant,
                                            seed=seed, threads=cfg.threads)
        # the selection stage reuses the no-selection solution path
        design = build_design(grid)
        xi2 = cv_select_xi2(diag["path"].theta, design)
        selected = group_lasso_paths(diag["path"].theta, design, xi2).selected
        ssx = simselex_assemble(diag["path"], selected, cfg.extrapolant)
        report.append({
            "seed_index": r,
            "naive_nonzero": naive.nonzero_count,
            "noselect_nonzero": noselect.nonzero_count,
            "noselect_above_0.001": int(np.sum(np.abs(noselect.coefficients) > 0.001)),
            "simselex_nonzero": ssx.nonzero_count,
        })
        logger.info("demo seed %d: %s", r, report[-1])
    return report


def write_demo_csv(path: str, report, cfg: ExperimentConfig) -> None:
    cols = ["seed_index", "naive_nonzero", "noselect_nonzero",
            "noselect_above_0.001", "simselex_nonzero"]
    with open(path, "w", newline="") as fh:
        fh.write(f"# config {cfg.config_hash()}\n")
        writer = csv.writer(fh)
        writer.writerow(cols)
        for entry in report:
            writer.writerow([entry[c] for c in cols])


# ---------------------------------------------------------------------------
# built-in table configurations (desk scale by default)


def table_configs(table: str, scale: Optional[int] = None, seed: int = 2026,
                  p: int = 100, threads: int = 1):
    """Named configurations reproducing the benchmark tables.

    Returns a list of (tag, ExperimentConfig).  scale overrides the
    replicate count (full-size runs use 500).
    """
    n_reps = scale if scale else 50
    if table == "1":
        base = dict(model="linear", p=p, replicates=n_reps, seed=seed,
                    estimators=("true", "naive", "corrected_lasso", "simselex"),
                    b=100, threads=threads)
        return [
            ("table1_theta1", ExperimentConfig(theta=THETA_PATTERNS["theta1"], **base)),
            ("table1_theta2", ExperimentConfig(theta=THETA_PATTERNS["theta2-linear"], **base)),
        ]
    if table == "2":
        base = dict(model="logistic", p=p, replicates=n_reps, seed=seed,
                    estimators=("true", "naive", "simselex"), b=100, threads=threads)
        return [
            ("table2_theta1", ExperimentConfig(theta=THETA_PATTERNS["theta1"], **base)),
            ("table2_theta2", ExperimentConfig(theta=THETA_PATTERNS["theta2-glm"], **base)),
        ]
    if table == "3":
        base = dict(model="cox", p=p, replicates=n_reps, seed=seed,
                    estimators=("true", "naive", "simselex"), b=20, threads=threads)
        return [
            ("table3_theta1", ExperimentConfig(theta=THETA_PATTERNS["theta1"], **base)),
            ("table3_theta2", ExperimentConfig(theta=THETA_PATTERNS["theta2-glm"], **base)),
        ]
    if table == "4":
        base = dict(model="spline", p=p, replicates=scale if scale else 30,
                    seed=seed, estimators=("true", "naive", "simselex"), b=20,
                    threads=threads)
        return [
            ("table4_nsr05", ExperimentConfig(sigma_u_sq=0.15, **base)),
            ("table4_nsr10", ExperimentConfig(sigma_u_sq=0.30, **base)),
        ]
    if table == "C1":
        base = dict(model="spline", p=p, replicates=scale if scale else 30,
                    seed=seed, estimators=("simselex",), b=20, sigma_u_sq=0.15,
                    threads=threads)
        return [
            ("tableC1_l2norm", ExperimentConfig(selection_variant="l2norm", **base)),
            ("tableC1_l1norm", ExperimentConfig(selection_variant="l1norm", **base)),
            ("tableC1_allcoef", ExperimentConfig(selection_variant="all_coef", **base)),
        ]
    if table == "A":
        cfg = ExperimentConfig(
            model="linear", n=300, p=500, sigma_u=float(np.sqrt(0.45)),
            replicates=scale if scale else 5, seed=seed, b=100, m=13,
            grid_lo=0.2, grid_hi=2.0,
            estimators=("naive", "simex_noselect", "simselex"), threads=threads)
        return [("appendixA_demo", cfg)]
    raise ConfigError(f"unknown table {table!r}; choose 1, 2, 3, 4, C1, or A")
