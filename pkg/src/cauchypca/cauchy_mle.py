"""Maximum-likelihood fit of the univariate Cauchy location-scale model.

All functions accept optional nonnegative observation weights; the
unweighted case is weight 1 per observation.  Weighted fits are what the
finite-contamination influence oracle uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegenerateSampleError

SCORE_TOL = 1e-9
MAX_NEWTON_ITER = 200
MAX_HALVINGS = 60


@dataclass(frozen=True)
class CauchyParams:
    mu: float
    sigma: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be finite and > 0, got {self.sigma}")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.sigma])


def _weights(c: np.ndarray, weights) -> np.ndarray:
    if weights is None:
        return np.ones_like(c)
    w = np.asarray(weights, dtype=float)
    if w.shape != c.shape or np.any(w < 0):
        raise ValueError("weights must be nonnegative and match the sample")
    return w


def cauchy_loglik(params: CauchyParams, c, weights=None) -> float:
    """``n log(sigma/pi) - sum log(sigma^2 + (c - mu)^2)``."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    w = _weights(c, weights)
    mu, sigma = params.mu, params.sigma
    r = c - mu
    return float(w.sum() * math.log(sigma / math.pi) - w @ np.log(sigma**2 + r * r))


def cauchy_score_and_hessian(params: CauchyParams, c, weights=None):
    """Analytic gradient and Hessian of :func:`cauchy_loglik` in ``(mu, sigma)``."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    w = _weights(c, weights)
    mu, sigma = params.mu, params.sigma
    r = c - mu
    s2 = sigma * sigma
    d = s2 + r * r
    d2 = d * d
    W = w.sum()
    score = np.array([
        w @ (2.0 * r / d),
        W / sigma - w @ (2.0 * sigma / d),
    ])
    h_mm = w @ (2.0 * (r * r - s2) / d2)
    h_ms = w @ (-4.0 * r * sigma / d2)
    h_ss = -W / s2 + w @ (2.0 * (s2 - r * r) / d2)
    hess = np.array([[h_mm, h_ms], [h_ms, h_ss]])
    return score, hess


def type7_iqr(c: np.ndarray) -> float:
    q1, q3 = np.percentile(c, [25.0, 75.0])
    return float(q3 - q1)


def _check_sample(c: np.ndarray, w: np.ndarray) -> None:
    if c.ndim != 1 or c.size < 3:
        raise DegenerateSampleError(f"need at least 3 projections, got {c.size}")
    if not np.all(np.isfinite(c)):
        raise DegenerateSampleError("projections contain non-finite values")
    if np.ptp(c) == 0.0:
        raise DegenerateSampleError("all projections are identical; scale would be 0")
    # More than half the mass on one value drives the MLE scale to zero.
    vals, inverse = np.unique(c, return_inverse=True)
    mass = np.bincount(inverse, weights=w, minlength=vals.size)
    if mass.max() > 0.5 * w.sum():
        raise DegenerateSampleError(
            "over half the sample mass sits on a single value; the MLE scale is 0"
        )


def _initial_params(c: np.ndarray) -> CauchyParams:
    mu0 = float(np.median(c))
    sigma0 = 0.5 * type7_iqr(c)
    if sigma0 <= 0.0:
        sigma0 = float(np.mean(np.abs(c - mu0)))
    return CauchyParams(mu0, sigma0)


def _ascent_step(score: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """Newton step, with the Hessian forced negative definite when it is not."""
    evals, evecs = np.linalg.eigh(hess)
    floor = 1e-12 * max(np.max(np.abs(evals)), 1e-300)
    evals = -np.maximum(np.abs(evals), floor)
    return -(evecs / evals) @ (evecs.T @ score)


def fit_cauchy(c, weights=None, *, start: CauchyParams | None = None) -> CauchyParams:
    """Cauchy MLE by damped Newton-Raphson from the median / half-IQR start.

    Each Newton step is halved until the log-likelihood does not decrease,
    and the scale may shrink by at most half per step.  Iteration stops once
    ``max(1, sigma) * ||score||_inf <= 1e-9 * sum(weights)``.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    w = _weights(c, weights)
    _check_sample(c, w)
    W = float(w.sum())
    params = start if start is not None else _initial_params(c)
    ll = cauchy_loglik(params, c, w)
    floor_hits = 0

    for _ in range(MAX_NEWTON_ITER):
        score, hess = cauchy_score_and_hessian(params, c, w)
        gnorm = float(np.max(np.abs(score)))
        if max(1.0, params.sigma) * gnorm <= SCORE_TOL * W:
            return params
        # Tiny scales put the raw score below rounding noise; settle for the
        # scale-free criterion once it has held for a few steps.
        if params.sigma * gnorm <= SCORE_TOL * W:
            floor_hits += 1
            if floor_hits >= 3:
                return params
        step = _ascent_step(score, hess)
        # Near the optimum the true gain drops below the rounding noise of ll.
        slack = 64 * np.finfo(float).eps * (abs(ll) + W)
        t = 1.0
        for _ in range(MAX_HALVINGS):
            mu_new = params.mu + t * step[0]
            sigma_new = max(params.sigma + t * step[1], 0.5 * params.sigma)
            cand = CauchyParams(mu_new, sigma_new)
            ll_new = cauchy_loglik(cand, c, w)
            if ll_new >= ll - slack:
                break
            t *= 0.5
        else:
            # No representable improvement: accept if we sit at the rounding floor.
            if params.sigma * gnorm <= 1e-6 * W:
                return params
            raise ConvergenceError("Newton line search stalled away from a stationary point")
        if cand == params:
            if params.sigma * gnorm <= 1e-6 * W:
                return params
            raise ConvergenceError("Newton step underflowed away from a stationary point")
        params, ll = cand, ll_new
    raise ConvergenceError(f"Cauchy MLE did not converge in {MAX_NEWTON_ITER} Newton steps")
