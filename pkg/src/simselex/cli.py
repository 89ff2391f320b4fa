"""Command-line interface.

Subcommands: fit (measurement-error-corrected sparse fit on real data),
fit-naive and fit-corrected (competitor fits with the same I/O), microarray
(posterior-summary standardization followed by a logistic fit), and
reproduce (benchmark table reruns at configurable scale).  Exit codes:
0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys

import numpy as np

from .data import ContaminatedDataset, standardize_microarray
from .errors import ConfigError, NumericalError
from .experiments import (ExperimentConfig, THETA_PATTERNS, run_experiment,
                          simex_failure_demo, table_configs, write_demo_csv,
                          write_metrics_csv, write_timings_csv)
from .extrapolation import SparseEstimate
from .io import (load_matrix_csv, load_outcome_csv, load_sigma_u,
                 write_coefficients_csv, write_curves_csv)
from .pipeline import simselex_fit
from .simex import make_lambda_grid, naive_fit
from .solvers import cv_corrected_lasso
from .splines import export_curves, simselex_spline

logger = logging.getLogger("simselex")


def _add_common_fit_args(sub):
    sub.add_argument("--w", required=True, help="covariate CSV (headerless)")
    sub.add_argument("--y", required=True, help="outcome CSV")
    sub.add_argument("--sigma-u", required=True,
                     help="measurement-error covariance: full CSV, diagonal CSV, or scalar variance")
    sub.add_argument("--out", required=True, help="output coefficient CSV")
    sub.add_argument("--model", choices=("linear", "logistic", "cox", "spline"),
                     default="linear")
    sub.add_argument("--b", type=int, default=None, help="pseudodata replicates per scale")
    sub.add_argument("--m", type=int, default=5, help="grid size")
    sub.add_argument("--grid", default="0.01,2", help="grid bounds lo,hi")
    sub.add_argument("--extrapolant", choices=("linear", "quadratic", "nonlinear"),
                     default="quadratic")
    sub.add_argument("--rule", choices=("min", "1se"), default="1se")
    sub.add_argument("--folds", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted both before and after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="simselex",
        description="Sparse errors-in-variables estimation by simulation, "
                    "selection, and extrapolation.",
        parents=[common],
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def add_command(name, **kw):
        return commands.add_parser(name, parents=[common], **kw)

    fit = add_command("fit", help="measurement-error-corrected sparse fit")
    _add_common_fit_args(fit)
    fit.add_argument("--curves-out", default=None,
                     help="spline model: CSV of reconstructed component curves")
    fit.add_argument("--knots", type=int, default=6)
    fit.add_argument("--alpha", type=float, default=0.05)
    fit.add_argument("--variant", choices=("l2norm", "l1norm", "all_coef"),
                     default="l2norm")

    naive = add_command("fit-naive", help="uncorrected penalized fit")
    _add_common_fit_args(naive)

    corr = add_command("fit-corrected",
                       help="corrected-loss l1-ball fit (linear model)")
    _add_common_fit_args(corr)

    micro = add_command("microarray",
                        help="standardize posterior summaries, filter noisy "
                             "genes, then fit the logistic model")
    micro.add_argument("--means", required=True)
    micro.add_argument("--vars", required=True)
    micro.add_argument("--y", required=True, help="binary outcome CSV")
    micro.add_argument("--nsr-cutoff", type=float, default=0.5)
    micro.add_argument("--out", required=True)
    micro.add_argument("--b", type=int, default=100)
    micro.add_argument("--m", type=int, default=5)
    micro.add_argument("--grid", default="0.01,2")
    micro.add_argument("--extrapolant", choices=("linear", "quadratic", "nonlinear"),
                       default="quadratic")
    micro.add_argument("--rule", choices=("min", "1se"), default="1se")
    micro.add_argument("--folds", type=int, default=10)
    micro.add_argument("--kept-out", default=None,
                       help="optional CSV of retained gene indices")

    rep = add_command("reproduce", help="rerun a benchmark table")
    rep.add_argument("--table", required=True, choices=("1", "2", "3", "4", "C1", "A"))
    rep.add_argument("--scale", type=int, default=None,
                     help="replicate count override (desk default 50; spline 30; demo 5)")
    rep.add_argument("--p", type=int, default=100)
    rep.add_argument("--out", required=True, help="output directory")
    rep.add_argument("--config", default=None,
                     help="INI file overriding the built-in design")

    return parser


_EXTRAP_MAP = {"linear": "linear", "quadratic": "quadratic",
               "nonlinear": "nonlinear_means"}


def _parse_grid(text: str):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}; expected lo,hi") from exc
    return lo, hi


def _load_dataset(args) -> ContaminatedDataset:
    W = load_matrix_csv(args.w)
    outcome = load_outcome_csv(args.y, args.model)
    sigma_u = load_sigma_u(args.sigma_u, W.shape[1])
    return ContaminatedDataset(W=W, outcome=outcome, sigma_u=sigma_u)


def _default_b(args) -> int:
    if args.b is not None:
        return args.b
    return 20 if args.model in ("cox", "spline") else 100


def _cmd_fit(args) -> int:
    dataset = _load_dataset(args)
    lo, hi = _parse_grid(args.grid)
    grid = make_lambda_grid(args.m, lo, hi)
    if args.model == "spline":
        fit, _ = simselex_spline(dataset, grid=grid, B=_default_b(args),
                                 selection_variant=args.variant,
                                 kind=_EXTRAP_MAP[args.extrapolant],
                                 alpha=args.alpha, K=args.knots,
                                 folds=args.folds, seed=args.seed,
                                 cv_per_pseudodataset=False,
                                 threads=args.threads)
        flat = fit.beta.ravel()
        width = fit.basis.functions_per_covariate
        support = frozenset(j * width + k for j in fit.selected for k in range(width))
        est = SparseEstimate(coefficients=flat, support=support,
                             provenance={int(j * width): {
                                 "selected_by": "group-lasso",
                                 "extrapolant": _EXTRAP_MAP[args.extrapolant],
                                 "fit_rss": 0.0} for j in fit.selected})
        write_coefficients_csv(args.out, est)
        if args.curves_out:
            write_curves_csv(args.curves_out, export_curves(fit))
    else:
        est, _ = simselex_fit(dataset, grid=grid, B=_default_b(args),
                              rule=args.rule,
                              extrapolant=_EXTRAP_MAP[args.extrapolant],
                              folds=args.folds, seed=args.seed,
                              threads=args.threads)
        write_coefficients_csv(args.out, est)
    return 0


def _cmd_fit_naive(args) -> int:
    dataset = _load_dataset(args)
    est = naive_fit(dataset, rule=args.rule, folds=args.folds, seed=args.seed)
    write_coefficients_csv(args.out, est)
    return 0


def _cmd_fit_corrected(args) -> int:
    if args.model != "linear":
        raise ConfigError("fit-corrected applies to the linear model only")
    dataset = _load_dataset(args)
    fit = cv_corrected_lasso(np.asarray(dataset.W), np.asarray(dataset.outcome.y),
                             np.asarray(dataset.sigma_u), folds=args.folds,
                             seed=args.seed)
    support = frozenset(int(j) for j in np.flatnonzero(fit.coefficients))
    est = SparseEstimate(coefficients=fit.coefficients, support=support,
                         provenance={})
    write_coefficients_csv(args.out, est)
    return 0


def _cmd_microarray(args) -> int:
    mu = load_matrix_csv(args.means)
    var = load_matrix_csv(args.vars)
    outcome = load_outcome_csv(args.y, "logistic")
    dataset, kept = standardize_microarray(mu, var, args.nsr_cutoff, outcome)
    logger.info("retained %d of %d genes", len(kept), mu.shape[1])
    if args.kept_out:
        np.savetxt(args.kept_out, kept, fmt="%d")
    lo, hi = _parse_grid(args.grid)
    grid = make_lambda_grid(args.m, lo, hi)
    est, _ = simselex_fit(dataset, grid=grid, B=args.b, rule=args.rule,
                          extrapolant=_EXTRAP_MAP[args.extrapolant],
                          folds=args.folds, seed=args.seed, threads=args.threads)
    write_coefficients_csv(args.out, est)
    return 0


def _config_from_ini(path: str, threads: int) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    values = {}
    for section in parser.sections():
        values.update(dict(parser.items(section)))
    kwargs = {"threads": threads}
    casts = {
        "model": str, "n": int, "p": int, "rho": float, "sigma_u": float,
        "sigma_eps": float, "weibull_shape": float, "weibull_scale": float,
        "censor_rate": float, "sigma_u_sq": float, "replicates": int, "b": int,
        "m": int, "grid_lo": float, "grid_hi": float, "rule": str,
        "extrapolant": str, "selection_variant": str, "knots": int,
        "alpha": float, "folds": int, "seed": int,
        "cv_per_pseudodataset": lambda v: v.lower() in ("1", "true", "yes"),
    }
    for key, raw in values.items():
        if key == "theta":
            if raw in THETA_PATTERNS:
                kwargs["theta"] = THETA_PATTERNS[raw]
            else:
                kwargs["theta"] = tuple(float(v) for v in raw.split(","))
        elif key == "estimators":
            kwargs["estimators"] = tuple(v.strip() for v in raw.split(","))
        elif key in casts:
            kwargs[key] = casts[key](raw)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_reproduce(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.config:
        cfg = _config_from_ini(args.config, args.threads)
        if args.scale:
            cfg.replicates = args.scale
        configs = [("custom", cfg)]
    else:
        configs = table_configs(args.table, scale=args.scale, seed=args.seed or 2026,
                                p=args.p, threads=args.threads)
    for tag, cfg in configs:
        if args.table == "A" and not args.config:
            report = simex_failure_demo(cfg, seeds=cfg.replicates)
            write_demo_csv(os.path.join(args.out, f"{tag}.csv"), report, cfg)
        else:
            out_path = os.path.join(args.out, f"{tag}.csv")
            rows = run_experiment(cfg, out_path)
            for row in rows:
                logger.info("%s: %s l2=%.4g fp=%.3g fn=%.3g mise=%.4g", tag,
                            row.estimator, row.l2_mean, row.fp_mean, row.fn_mean,
                            row.mise_mean)
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "fit-naive": _cmd_fit_naive,
    "fit-corrected": _cmd_fit_corrected,
    "microarray": _cmd_microarray,
    "reproduce": _cmd_reproduce,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed = getattr(args, "seed", 0)
    args.threads = getattr(args, "threads", 1)
    args.verbose = getattr(args, "verbose", False)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
