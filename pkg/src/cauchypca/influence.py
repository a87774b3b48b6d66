"""Influence functions of the leading principal direction.

Analytic evaluators exist for classical PCA and for Cauchy PCA; the
Cauchy one works at the empirical distribution of a fitted sample, so every
population integral becomes a (weighted) sample average.  :func:`empirical_if`
is the finite-contamination counterpart used to check both.

Notation for the Cauchy case, with ``g(c; mu, sigma) = log(sigma/pi) -
log(sigma^2 + (c - mu)^2)`` evaluated at the fitted parameters:

* ``lam0 = E[g_c(x'u) x'u]``  (scalar)
* ``S = E[g_cc x x']``         (p x p)
* ``C = E[x g_ctheta']``       (p x 2)
* ``H = E[g_thetatheta]``      (2 x 2, the raw Hessian average, negative definite)

Three assemblies of ``A`` and ``b`` are available through ``variant``:

``"derived"`` (default)
    Implicit differentiation of ``P_u E_F[g_c x] = 0`` in both the mixing
    weight and the direction:
    ``A = lam0 I - P S P + P C H^-1 C' P`` and
    ``b = P (g_c(z) z - C H^-1 g_theta(z))``.
``"main"``
    The closed form as commonly stated: same ``A``, but
    ``b = g_c(z) z + C H^-1 g_theta(z)`` (no projection, opposite sign on the
    scale/location correction).
``"appendix"``
    ``A = (E[g_cc |x|^2] + lam0) I + C H^-1 C'`` and
    ``b = P (E[g_c x] - g_c(z) z)``.

Only ``"derived"`` reproduces the finite-contamination derivative; the other
two are kept so the comparison stays reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .cauchy_mle import CauchyParams
from .cauchy_pca import CauchyPcaConfig, fit_cauchy_pca
from .errors import MultiplicityError, SingularFisherError
from .linalg import (
    CovarianceModel,
    as_data_matrix,
    canonical_sign,
    classical_first_pc,
    pseudo_inverse_shifted,
)

COND_LIMIT = 1e12
VARIANTS = ("derived", "main", "appendix")


@dataclass(frozen=True)
class ClassicalIfResult:
    if_vector: np.ndarray
    if_eigenvalue: float
    pinv: np.ndarray
    direction: np.ndarray
    eigenvalue: float


@dataclass(frozen=True)
class CauchyIfResult:
    a_matrix: np.ndarray
    b_vector: np.ndarray
    if_vector: np.ndarray | None
    fisher: np.ndarray
    singular: bool = False

    @property
    def information(self) -> np.ndarray:
        """``-fisher``: the positive-definite expected-information form."""
        return -self.fisher


@dataclass(frozen=True)
class GBarDerivatives:
    """First and second partials of ``g`` in ``c`` and ``theta = (mu, sigma)``.

    Fields broadcast over array-valued ``c``; ``g_c_theta`` has a trailing
    axis of length 2 and ``g_theta_theta`` trailing shape ``(2, 2)``.
    """

    g: np.ndarray
    g_c: np.ndarray
    g_mu: np.ndarray
    g_sigma: np.ndarray
    g_cc: np.ndarray
    g_c_theta: np.ndarray
    g_theta_theta: np.ndarray

    @property
    def g_theta(self) -> np.ndarray:
        return np.stack([self.g_mu, self.g_sigma], axis=-1)


def classical_if(z, model: CovarianceModel) -> ClassicalIfResult:
    """IF of the leading eigenvector and eigenvalue of ``model.sigma`` at ``z``."""
    z = np.asarray(z, dtype=float)
    evals = np.linalg.eigvalsh(model.sigma)
    top = evals[-1]
    if model.p > 1 and (top - evals[-2]) <= 1e-8 * abs(top):
        raise MultiplicityError("leading eigenvalue is not simple")
    evecs = np.linalg.eigh(model.sigma)[1]
    u = canonical_sign(evecs[:, -1])
    pinv = pseudo_inverse_shifted(model.sigma, top)
    d = z - model.mu
    t = float(d @ u)
    return ClassicalIfResult(
        if_vector=-t * (pinv @ d),
        if_eigenvalue=t * t - float(top),
        pinv=pinv,
        direction=u,
        eigenvalue=float(top),
    )


def gbar_derivatives(c, params: CauchyParams) -> GBarDerivatives:
    c = np.asarray(c, dtype=float)
    mu, sigma = params.mu, params.sigma
    r = c - mu
    s2 = sigma * sigma
    d = s2 + r * r
    d2 = d * d
    g = np.log(sigma / np.pi) - np.log(d)
    g_c = -2.0 * r / d
    g_sigma = 1.0 / sigma - 2.0 * sigma / d
    g_cc = 2.0 * (r * r - s2) / d2
    g_c_mu = -g_cc
    g_c_sigma = 4.0 * r * sigma / d2
    g_mu_mu = g_cc
    g_mu_sigma = -g_c_sigma
    g_sigma_sigma = -1.0 / s2 + 2.0 * (s2 - r * r) / d2
    g_tt = np.stack([
        np.stack([g_mu_mu, g_mu_sigma], axis=-1),
        np.stack([g_mu_sigma, g_sigma_sigma], axis=-1),
    ], axis=-2)
    return GBarDerivatives(
        g=g,
        g_c=g_c,
        g_mu=-g_c,
        g_sigma=g_sigma,
        g_cc=g_cc,
        g_c_theta=np.stack([g_c_mu, g_c_sigma], axis=-1),
        g_theta_theta=g_tt,
    )


def _cond(M: np.ndarray) -> float:
    s = np.linalg.svd(M, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else np.inf


def cauchy_if_terms(X, u_hat, params: CauchyParams, weights=None):
    """Sample averages ``(lam0, S, C, H)`` entering ``A`` and ``b``."""
    X = np.asarray(X, dtype=float)
    u = np.asarray(u_hat, dtype=float)
    n = X.shape[0]
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, float) / np.sum(weights)
    c = X @ u
    gd = gbar_derivatives(c, params)
    lam0 = float(w @ (gd.g_c * c))
    S = (X * (w * gd.g_cc)[:, None]).T @ X
    C = X.T @ (w[:, None] * gd.g_c_theta)
    H = np.einsum("i,ijk->jk", w, gd.g_theta_theta)
    return lam0, S, C, H


def cauchy_if(
    z,
    X,
    u_hat,
    params: CauchyParams,
    *,
    weights=None,
    variant: Literal["derived", "main", "appendix"] = "derived",
) -> CauchyIfResult:
    """Analytic IF ``A^{-1} b`` of a converged Cauchy direction at the point ``z``.

    ``(u_hat, params)`` must be a converged fit on ``X``; integrals are
    averages over the rows of ``X`` (optionally weighted).
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    X = as_data_matrix(X, min_rows=3)
    z = np.asarray(z, dtype=float)
    u = np.asarray(u_hat, dtype=float)
    p = X.shape[1]
    lam0, S, C, H = cauchy_if_terms(X, u, params, weights)
    if _cond(H) > COND_LIMIT:
        raise SingularFisherError(f"averaged Hessian is singular (cond={_cond(H):.3g})")
    Hinv = np.linalg.inv(H)
    P = np.eye(p) - np.outer(u, u)
    gz = gbar_derivatives(float(z @ u), params)
    gz_theta = np.array([gz.g_mu, gz.g_sigma], dtype=float)
    CHC = C @ Hinv @ C.T

    if variant == "appendix":
        w = None if weights is None else np.asarray(weights, float) / np.sum(weights)
        sq = np.einsum("ij,ij->i", X, X)
        c = X @ u
        gd = gbar_derivatives(c, params)
        avg = (lambda v: v.mean(axis=0)) if w is None else (lambda v: w @ v)
        A = (float(avg(gd.g_cc * sq)) + lam0) * np.eye(p) + CHC
        mean_gc_x = avg(gd.g_c[:, None] * X)
        b = P @ (mean_gc_x - float(gz.g_c) * z)
    else:
        A = lam0 * np.eye(p) - P @ S @ P + P @ CHC @ P
        if variant == "derived":
            b = P @ (float(gz.g_c) * z - C @ Hinv @ gz_theta)
        else:
            b = float(gz.g_c) * z + C @ Hinv @ gz_theta

    if _cond(A) > COND_LIMIT:
        return CauchyIfResult(a_matrix=A, b_vector=b, if_vector=None, fisher=H, singular=True)
    return CauchyIfResult(a_matrix=A, b_vector=b, if_vector=np.linalg.solve(A, b), fisher=H)


def _fit_leading(X, weights, estimator: str, start=None, outer_tol: float = 1e-9):
    if estimator == "classical":
        return classical_first_pc(X, weights)[0], None
    if start is None:
        cfg = CauchyPcaConfig(k=1, outer_tol=outer_tol, max_outer_iters=20_000)
    else:
        cfg = CauchyPcaConfig(
            k=1, outer_tol=outer_tol, max_outer_iters=20_000,
            init_mode="provided", init_directions=(start,),
        )
    res = fit_cauchy_pca(X, cfg, weights=weights)
    return res.directions[0], res.params[0]


def empirical_if(z, X, estimator: str = "cauchy", eps: float = 0.01, *, outer_tol: float = 1e-9):
    """Finite-contamination IF ``(u_eps - u) / eps`` by row reweighting.

    The original rows get weight ``(1 - eps)/n`` and ``z`` gets ``eps``.
    """
    if estimator not in ("classical", "cauchy"):
        raise ValueError(f"estimator must be 'classical' or 'cauchy', got {estimator!r}")
    if not 0 < eps <= 0.05:
        raise ValueError(f"eps must be in (0, 0.05], got {eps}")
    X = as_data_matrix(X, min_rows=3)
    z = np.asarray(z, dtype=float)
    n = X.shape[0]
    u0, _ = _fit_leading(X, None, estimator, outer_tol=outer_tol)
    Xa = np.vstack([X, z])
    w = np.append(np.full(n, (1.0 - eps) / n), eps)
    u_eps, _ = _fit_leading(Xa, w, estimator, start=u0, outer_tol=outer_tol)
    if u_eps @ u0 < 0:
        u_eps = -u_eps
    return (u_eps - u0) / eps


def empirical_if_richardson(z, X, estimator: str = "cauchy", eps=(0.02, 0.01), **kw):
    """First-order Richardson extrapolation of :func:`empirical_if` over ``eps``.

    With two step sizes ``e1 > e2`` the O(eps) bias cancels in
    ``(e1 * IF(e2) - e2 * IF(e1)) / (e1 - e2)``; longer sequences are folded
    pairwise (Neville-style) assuming error terms in powers of eps.
    """
    eps = tuple(float(e) for e in eps)
    if len(eps) < 2:
        return empirical_if(z, X, estimator, eps[0], **kw)
    table = [empirical_if(z, X, estimator, e, **kw) for e in eps]
    for level in range(1, len(eps)):
        table = [
            (eps[i] * table[i + 1] - eps[i + level] * table[i]) / (eps[i] - eps[i + level])
            for i in range(len(table) - 1)
        ]
    return table[0]
