"""Sequential Cauchy principal components.

Each component alternates two steps until the direction stops moving:

1. fit the Cauchy location/scale to the projections ``X u`` (inner max);
2. replace ``u`` by the normalized weighted sum
   ``sum_i (x_i'u - mu) x_i / (sigma^2 + (x_i'u - mu)^2)`` (outer fixed point).

The data are then deflated along the accepted direction and the next
component is estimated on what remains.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .cauchy_mle import CauchyParams, cauchy_loglik, fit_cauchy
from .errors import (
    CauchyPcaError,
    ConvergenceError,
    UnsupportedDimensionError,
    ZeroUpdateError,
    ZeroVarianceError,
)
from .linalg import (
    angle_degrees,
    as_data_matrix,
    canonical_sign,
    classical_first_pc,
    deflate,
    project_out,
    unit_direction,
    weighted_moments,
)

logger = logging.getLogger(__name__)

INIT_MODES = ("classical-pc", "random", "provided")


@dataclass(frozen=True)
class CauchyPcaConfig:
    """Loop controls.  ``outer_tol`` is the angle change (degrees) that ends a component."""

    k: int = 1
    outer_tol: float = 1e-6
    max_outer_iters: int = 500
    init_mode: str = "classical-pc"
    init_directions: tuple = ()
    seed: int | None = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.outer_tol > 0:
            raise ValueError(f"outer_tol must be > 0, got {self.outer_tol}")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")
        if self.init_mode == "provided" and len(self.init_directions) < self.k:
            raise ValueError("init_mode='provided' needs one initial direction per component")


@dataclass
class CauchyPcaResult:
    directions: list[np.ndarray] = field(default_factory=list)
    params: list[CauchyParams] = field(default_factory=list)
    iterations: list[int] = field(default_factory=list)
    converged: list[bool] = field(default_factory=list)

    @property
    def components(self) -> np.ndarray:
        """Directions stacked as a ``(k, p)`` array."""
        return np.vstack(self.directions)


def fixed_point_update(X, u, params: CauchyParams, weights=None) -> np.ndarray:
    """One outer step: the normalized Cauchy-weighted direction, canonical sign."""
    X = np.asarray(X, dtype=float)
    r = X @ np.asarray(u, dtype=float) - params.mu
    coef = r / (params.sigma**2 + r * r)
    if weights is not None:
        coef = coef * np.asarray(weights, dtype=float)
    v = X.T @ coef
    norm = np.linalg.norm(v)
    if norm <= 1e-14:
        raise ZeroUpdateError(f"unnormalized update has norm {norm:.3g}")
    return canonical_sign(v / norm)


def profile_objective(X, u, weights=None) -> float:
    """Cauchy log-likelihood at the inner maximum for direction ``u``."""
    c = np.asarray(X, dtype=float) @ np.asarray(u, dtype=float)
    return cauchy_loglik(fit_cauchy(c, weights), c, weights)


def _initial_direction(X, cfg: CauchyPcaConfig, j: int, previous, weights, rng) -> np.ndarray:
    if cfg.init_mode == "provided":
        u = np.asarray(cfg.init_directions[j], dtype=float)
    elif cfg.init_mode == "classical-pc":
        try:
            u, _ = classical_first_pc(X, weights)
        except (ConvergenceError, ZeroVarianceError) as exc:
            logger.debug("classical start unavailable (%s); using a random start", exc)
            u = rng.standard_normal(X.shape[1])
    else:
        u = rng.standard_normal(X.shape[1])
    u = project_out(u, previous)
    norm = np.linalg.norm(u)
    if norm <= 1e-12:
        # Start fell inside the span of earlier components; pick a fresh one.
        u = project_out(rng.standard_normal(X.shape[1]), previous)
        norm = np.linalg.norm(u)
    return u / norm


def _fit_component(X, u, cfg: CauchyPcaConfig, previous, weights):
    converged = False
    it = 0
    params = None
    for it in range(1, cfg.max_outer_iters + 1):
        # Warm start: the MLE is unique, so only the Newton path changes.
        params = fit_cauchy(X @ u, weights, start=params)
        new = fixed_point_update(X, u, params, weights)
        if previous:
            new = project_out(new, previous)
            new /= np.linalg.norm(new)
        if new @ u < 0:
            new = -new
        change = angle_degrees(new, u)
        u = new
        if change <= cfg.outer_tol:
            converged = True
            break
    u = canonical_sign(u)
    params = fit_cauchy(X @ u, weights)
    return u, params, it, converged


def fit_cauchy_pca(X, cfg: CauchyPcaConfig | None = None, weights=None) -> CauchyPcaResult:
    """Estimate ``cfg.k`` Cauchy principal directions by sequential deflation.

    Args:
        X: ``(n, p)`` data, rows are observations.  Centering/scaling is the
            caller's job (see :mod:`cauchypca.prep`).
        cfg: loop controls; defaults to one component, classical-PC start.
        weights: optional nonnegative row weights honored by every average.

    Raises:
        CauchyPcaError: with ``component`` set to the 1-based index that failed.
    """
    cfg = cfg or CauchyPcaConfig()
    X = as_data_matrix(X, min_rows=3)
    if cfg.k > X.shape[1]:
        raise ValueError(f"k={cfg.k} exceeds the dimension p={X.shape[1]}")
    rng = np.random.default_rng(cfg.seed)
    result = CauchyPcaResult()
    Xj = X
    for j in range(cfg.k):
        try:
            u0 = _initial_direction(Xj, cfg, j, result.directions, weights, rng)
            u, params, iters, ok = _fit_component(Xj, u0, cfg, result.directions, weights)
        except CauchyPcaError as exc:
            exc.component = j + 1
            raise
        if not ok:
            logger.info("component %d hit the %d-iteration cap", j + 1, cfg.max_outer_iters)
        result.directions.append(u)
        result.params.append(params)
        result.iterations.append(iters)
        result.converged.append(ok)
        Xj = deflate(Xj, u)
    return result


class EquivalenceResult(NamedTuple):
    angle: float
    variance_ratio: float
    degenerate: bool


def _sphere_grid(p: int, step_deg: float) -> np.ndarray:
    """Unit vectors covering a closed half-sphere in R^p (p <= 3) at ``step_deg``."""
    if p == 1:
        return np.ones((1, 1))
    if p == 2:
        t = np.radians(np.arange(0.0, 180.0, step_deg))
        return np.column_stack([np.cos(t), np.sin(t)])
    polar = np.radians(np.arange(0.0, 90.0 + step_deg / 2, step_deg))
    dirs = [np.array([[0.0, 0.0, 1.0]])]
    for th in polar[1:]:
        # Azimuth spacing shrinks near the pole to keep arc resolution uniform.
        m = max(1, int(np.ceil(360.0 * np.sin(th) / step_deg)))
        az = np.linspace(0.0, 2 * np.pi, m, endpoint=False)
        dirs.append(np.column_stack([
            np.sin(th) * np.cos(az), np.sin(th) * np.sin(az), np.full(m, np.cos(th))
        ]))
    return np.vstack(dirs)


def gaussian_profile_loglik(c: np.ndarray) -> np.ndarray:
    """Gaussian log-likelihood at the sample mean/variance, per column of ``c``."""
    n = c.shape[0]
    mu = c.mean(axis=0)
    var = ((c - mu) ** 2).mean(axis=0)
    return -0.5 * n * np.log(var) - 0.5 * ((c - mu) ** 2).sum(axis=0) / var


def gaussian_pca_equivalence_check(X, step_deg: float = 0.5) -> EquivalenceResult:
    """Compare the Gaussian profile-likelihood argmin with the variance argmax.

    The first is found by brute-force grid search over directions, the second
    by :func:`classical_first_pc`.  Only ``p <= 3`` is supported.
    """
    X = as_data_matrix(X)
    n, p = X.shape
    if p > 3:
        raise UnsupportedDimensionError(f"grid search supports p <= 3, got p={p}")
    try:
        u_cov, lam = classical_first_pc(X)
    except (ConvergenceError, ZeroVarianceError):
        return EquivalenceResult(float("nan"), float("nan"), True)
    grid = _sphere_grid(p, step_deg)
    best_val, best_u = np.inf, None
    for start in range(0, grid.shape[0], 4096):
        block = grid[start:start + 4096]
        vals = gaussian_profile_loglik(X @ block.T)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_u = vals[k], block[k]
    u_lik = unit_direction(best_u)
    _, cov = weighted_moments(X)
    ratio = float(u_lik @ cov @ u_lik) / lam
    return EquivalenceResult(angle_degrees(u_lik, u_cov), ratio, False)
