"""Robust centering and scaling applied before a Cauchy fit.

"MAD" here means the *mean* absolute deviation about the column median,
not the median absolute deviation.  Even-length medians use the lower
middle value so a centered column has median exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ZeroScaleError
from .linalg import as_data_matrix

CENTER_MODES = ("column-median", "spatial-median", "none")
SCALE_MODES = ("mad-about-median", "mad-about-mean", "median-abs-dev", "none")

WEISZFELD_TOL = 1e-8
WEISZFELD_MAX_ITER = 10_000
COINCIDE_TOL = 1e-12


@dataclass(frozen=True)
class CenteringSpec:
    mode: str = "column-median"
    scale: str = "mad-about-median"

    def __post_init__(self) -> None:
        if self.mode not in CENTER_MODES:
            raise ValueError(f"centering mode must be one of {CENTER_MODES}, got {self.mode!r}")
        if self.scale not in SCALE_MODES:
            raise ValueError(f"scale mode must be one of {SCALE_MODES}, got {self.scale!r}")


def lower_median(X: np.ndarray, axis: int = 0) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    n = X.shape[axis]
    return np.take(np.sort(X, axis=axis), (n - 1) // 2, axis=axis)


def column_median_center(X) -> tuple[np.ndarray, np.ndarray]:
    X = as_data_matrix(X, min_rows=1)
    center = lower_median(X)
    return X - center, center


def spatial_median(X) -> np.ndarray:
    """Minimizer of the summed Euclidean distance to the rows of ``X``.

    Weiszfeld iteration with the Vardi-Zhang modification: when the iterate
    lands on a data point, that point is optimal if the pull of the remaining
    points does not exceed its multiplicity; otherwise a damped step leaves it.
    Two rows give the midpoint by convention.
    """
    X = as_data_matrix(X, min_rows=1)
    n = X.shape[0]
    if n == 1 or np.all(X == X[0]):
        return X[0].copy()
    if n == 2:
        return 0.5 * (X[0] + X[1])

    scale = max(float(np.max(np.abs(X - X.mean(axis=0)))), 1e-300)
    m = X.mean(axis=0)
    for _ in range(WEISZFELD_MAX_ITER):
        diff = X - m
        dist = np.linalg.norm(diff, axis=1)
        on = dist <= COINCIDE_TOL * scale
        off = ~on
        inv = 1.0 / dist[off]
        pull = diff[off].T @ inv  # minus the gradient of the off-point terms
        eta = int(on.sum())
        pull_norm = float(np.linalg.norm(pull))
        if eta == 0:
            if pull_norm <= WEISZFELD_TOL:
                return m
        elif pull_norm <= eta:
            # Subgradient condition: zero lies in the subdifferential.
            return X[on][0].copy()
        T = (X[off].T @ inv) / inv.sum()
        if eta == 0:
            m_new = T
        else:
            gamma = min(1.0, eta / pull_norm)
            m_new = (1.0 - gamma) * T + gamma * m
        if np.linalg.norm(m_new - m) <= 1e-15 * scale and eta == 0:
            return m_new
        m = m_new
    raise ConvergenceError(f"Weiszfeld iteration did not converge in {WEISZFELD_MAX_ITER} steps")


def mad_scale(X, about: str = "median") -> tuple[np.ndarray, np.ndarray]:
    """Divide each column by its mean absolute deviation (about the lower median)."""
    X = as_data_matrix(X, min_rows=1)
    if about == "median":
        center = lower_median(X)
    elif about == "mean":
        center = X.mean(axis=0)
    else:
        raise ValueError(f"about must be 'median' or 'mean', got {about!r}")
    scales = np.mean(np.abs(X - center), axis=0)
    zero = np.flatnonzero(scales <= 0.0)
    if zero.size:
        j = int(zero[0])
        raise ZeroScaleError(f"column {j} has zero mean absolute deviation", column=j)
    return X / scales, scales


def median_abs_dev_scale(X) -> tuple[np.ndarray, np.ndarray]:
    """Divide each column by its median absolute deviation about the lower median."""
    X = as_data_matrix(X, min_rows=1)
    scales = lower_median(np.abs(X - lower_median(X)))
    zero = np.flatnonzero(scales <= 0.0)
    if zero.size:
        j = int(zero[0])
        raise ZeroScaleError(f"column {j} has zero median absolute deviation", column=j)
    return X / scales, scales


def preprocess(X, spec: CenteringSpec | None = None):
    """Center then scale ``X`` per ``spec``; returns ``(X', center, scales)``."""
    spec = spec or CenteringSpec()
    X = as_data_matrix(X, min_rows=1)
    if spec.mode == "column-median":
        X, center = column_median_center(X)
    elif spec.mode == "spatial-median":
        center = spatial_median(X)
        X = X - center
    else:
        center = np.zeros(X.shape[1])
    if spec.scale == "none":
        scales = np.ones(X.shape[1])
    elif spec.scale == "median-abs-dev":
        X, scales = median_abs_dev_scale(X)
    else:
        X, scales = mad_scale(X, about="median" if spec.scale == "mad-about-median" else "mean")
    return X, center, scales
