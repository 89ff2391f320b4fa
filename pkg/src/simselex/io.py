"""CSV ingestion and emission.

Covariates are headerless numeric CSV with one row per observation; outcomes
are single-column (survival: two columns, time then 0/1 event); the
measurement-error covariance can be a full p x p CSV, a single-column
diagonal CSV, or a scalar literal meaning a constant diagonal variance.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from .data import OutcomeVector
from .errors import ConfigError


def load_matrix_csv(path: str) -> np.ndarray:
    """Headerless numeric CSV as a 2-d float array."""
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read matrix from {path}: {exc}") from exc
    return arr


def load_outcome_csv(path: str, kind: str) -> OutcomeVector:
    """Outcome CSV for the given model kind (model names and outcome kinds
    are both accepted)."""
    arr = load_matrix_csv(path)
    if kind in ("survival", "cox"):
        if arr.shape[1] != 2:
            raise ConfigError("survival outcome needs two columns: time, event")
        return OutcomeVector("survival", arr[:, 0], arr[:, 1] != 0)
    if arr.shape[1] != 1:
        raise ConfigError(f"{kind} outcome must be a single column")
    kind_map = {"linear": "continuous", "logistic": "binary", "spline": "continuous"}
    return OutcomeVector(kind_map.get(kind, kind), arr[:, 0])


def load_sigma_u(spec: str, p: int) -> np.ndarray:
    """Measurement-error covariance from a file path or a scalar literal.

    A file with a single column is the diagonal; a p x p file is the full
    matrix; a plain number is a constant diagonal variance.
    """
    if os.path.exists(spec):
        arr = load_matrix_csv(spec)
        if arr.shape == (p, p):
            return arr
        if arr.shape[1] == 1 and arr.shape[0] == p:
            return np.diag(arr[:, 0])
        if arr.shape == (1, p):
            return np.diag(arr[0])
        raise ConfigError(
            f"sigma_u file must be {p}x{p} or a length-{p} diagonal, got {arr.shape}"
        )
    try:
        value = float(spec)
    except ValueError as exc:
        raise ConfigError(
            f"sigma_u must be an existing file or a scalar variance, got {spec!r}"
        ) from exc
    if value < 0:
        raise ConfigError("scalar sigma_u variance must be nonnegative")
    return value * np.eye(p)


def write_coefficients_csv(path: str, estimate) -> None:
    """index, estimate, selected flag, extrapolant, fit_rss; one row per
    coefficient."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "estimate", "selected", "extrapolant", "fit_rss"])
        support = estimate.support
        for j, value in enumerate(estimate.coefficients):
            info = estimate.provenance.get(j, {})
            writer.writerow([
                j,
                format(float(value), ".12g"),
                int(j in support),
                info.get("extrapolant") or "",
                format(float(info.get("fit_rss", 0.0)), ".12g"),
            ])


def write_curves_csv(path: str, curves: dict) -> None:
    """Stacked (covariate, x, value) rows of reconstructed component curves."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["covariate", "x", "value"])
        for j in sorted(curves):
            for x, v in curves[j]:
                writer.writerow([j, format(float(x), ".12g"), format(float(v), ".12g")])
