"""Dense linear-algebra substrate: unit directions, classical PCA, deflation.

Directions are plain 1-D ``float64`` arrays.  Every direction leaving this
package is put in *canonical sign*: the entry of largest magnitude is
nonnegative (first such index on ties).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ZeroVarianceError

UNIT_TOL = 1e-12
POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000
# Repeated squaring emulates 2**k power steps; 2**48 steps separates any
# eigengap that float64 can still resolve.
MAX_SQUARINGS = 48


def as_data_matrix(X, *, min_rows: int = 2) -> np.ndarray:
    """Validate and return ``X`` as a finite ``(n, p)`` float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"data matrix must be 2-D, got shape {X.shape}")
    n, p = X.shape
    if n < min_rows or p < 1:
        raise ValueError(f"data matrix needs n >= {min_rows} and p >= 1, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data matrix contains non-finite entries")
    return X


def canonical_sign(u: np.ndarray) -> np.ndarray:
    """Flip ``u`` so its largest-magnitude entry is nonnegative."""
    u = np.asarray(u, dtype=float)
    k = int(np.argmax(np.abs(u)))
    return -u if u[k] < 0 else u.copy()


def unit_direction(v) -> np.ndarray:
    """Normalize ``v`` and apply the canonical sign."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm == 0.0:
        raise ValueError("cannot normalize a zero or non-finite vector")
    return canonical_sign(v / norm)


def is_unit_direction(u: np.ndarray, tol: float = UNIT_TOL) -> bool:
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > tol:
        return False
    return u[int(np.argmax(np.abs(u)))] >= 0


@dataclass(frozen=True)
class CovarianceModel:
    """Location vector and scatter matrix of a (population or empirical) law."""

    sigma: np.ndarray
    mu: np.ndarray

    def __post_init__(self) -> None:
        sigma = np.asarray(self.sigma, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError("sigma must be square")
        if mu.shape != (sigma.shape[0],):
            raise ValueError("mu length must match sigma")
        scale = max(float(np.max(np.abs(sigma))), np.finfo(float).tiny)
        if np.max(np.abs(sigma - sigma.T)) > 1e-10 * scale:
            raise ValueError("sigma is not symmetric")
        evals = np.linalg.eigvalsh(sigma)
        if evals[0] < -1e-10 * max(evals[-1], 0.0) - 1e-300:
            raise ValueError("sigma is not positive semidefinite")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "mu", mu)

    @property
    def p(self) -> int:
        return self.sigma.shape[0]

    @classmethod
    def from_sample(cls, X, weights=None) -> "CovarianceModel":
        mu, sigma = weighted_moments(X, weights)
        return cls(sigma=sigma, mu=mu)


def weighted_moments(X, weights=None) -> tuple[np.ndarray, np.ndarray]:
    """Mean and 1/n-normalized covariance, optionally under row weights."""
    X = np.asarray(X, dtype=float)
    if weights is None:
        mu = X.mean(axis=0)
        D = X - mu
        return mu, D.T @ D / X.shape[0]
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    mu = w @ X
    D = X - mu
    return mu, (D * w[:, None]).T @ D


def orthonormal_basis(seed, p: int) -> np.ndarray:
    """Orthogonal ``p x p`` matrix from the QR factor of a seeded Gaussian draw.

    The factor is normalized so that ``R`` has a positive diagonal, which makes
    ``Q`` exactly the Gram-Schmidt orthonormalization of the draw's columns.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((p, p))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def leading_eigenpair(C: np.ndarray) -> tuple[np.ndarray, float]:
    """Leading eigenvector/eigenvalue of a symmetric PSD matrix by power iteration.

    A few rounds of repeated squaring (each one equivalent to doubling the
    number of power steps) seed a plain power iteration, which then runs until
    the relative change of the Rayleigh quotient and of the iterate both drop
    below ``POWER_TOL``.  A leading eigenvalue of multiplicity > 1 never
    collapses to a rank-one limit and is reported as ``ConvergenceError``.
    """
    C = np.asarray(C, dtype=float)
    C = 0.5 * (C + C.T)
    scale = np.linalg.norm(C)
    if scale == 0.0 or not np.isfinite(scale):
        raise ZeroVarianceError("covariance is identically zero")
    p = C.shape[0]
    if p == 1:
        return np.ones(1), float(C[0, 0])

    M = C / scale
    for _ in range(MAX_SQUARINGS):
        M = M @ M
        M /= np.linalg.norm(M)
        # A normalized PSD matrix tends to u u^T, whose trace is 1.
        if abs(np.trace(M) - 1.0) <= 1e-13:
            break
    else:
        raise ConvergenceError(
            "leading eigenvalue appears to be repeated (no rank-one limit)"
        )
    u = M[:, int(np.argmax(np.einsum("ij,ij->j", M, M)))]
    u = u / np.linalg.norm(u)
    lam = float(u @ C @ u)

    for _ in range(POWER_MAX_ITER):
        v = C @ u
        nv = np.linalg.norm(v)
        if nv == 0.0:
            raise ZeroVarianceError("iterate fell into the null space")
        v /= nv
        lam_new = float(v @ C @ v)
        change = np.linalg.norm(v - u)
        u = v
        if abs(lam_new - lam) <= POWER_TOL * abs(lam_new) and change <= POWER_TOL:
            lam = lam_new
            break
        lam = lam_new
    else:
        raise ConvergenceError(
            f"power iteration did not converge in {POWER_MAX_ITER} iterations"
        )
    if lam <= 0.0:
        raise ZeroVarianceError("leading eigenvalue is not positive")
    return canonical_sign(u), lam


def classical_first_pc(X, weights=None) -> tuple[np.ndarray, float]:
    """First principal direction and its variance (1/n normalization)."""
    X = as_data_matrix(X)
    _, C = weighted_moments(X, weights)
    if not np.any(C):
        raise ZeroVarianceError("all rows are identical")
    return leading_eigenpair(C)


def deflate(X, u) -> np.ndarray:
    """Remove the component along ``u`` from every row: ``X (I - u u^T)``."""
    X = np.asarray(X, dtype=float)
    u = np.asarray(u, dtype=float)
    return X - np.outer(X @ u, u)


def angle_degrees(a, b) -> float:
    """Sign-invariant angle between two unit directions, in [0, 90].

    Equals ``arccos(min(1, |a'b|))`` but is computed as an arctangent, which
    keeps full relative accuracy for nearly parallel directions.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = float(np.dot(a, b))
    # Averaging both residuals keeps the result exactly symmetric in (a, b).
    s = 0.5 * (float(np.linalg.norm(a - c * b)) + float(np.linalg.norm(b - c * a)))
    return float(np.degrees(np.arctan2(s, abs(c))))


def pseudo_inverse_shifted(sigma, lam: float) -> np.ndarray:
    """Moore-Penrose inverse of ``sigma - lam I`` for symmetric ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    evals, evecs = np.linalg.eigh(0.5 * (sigma + sigma.T))
    shifted = evals - lam
    cutoff = 1e-10 * np.max(np.abs(evals)) if evals.size else 0.0
    inv = np.zeros_like(shifted)
    keep = np.abs(shifted) > cutoff
    inv[keep] = 1.0 / shifted[keep]
    return (evecs * inv) @ evecs.T


def project_out(u: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    """Remove components of ``u`` along each (orthonormal) vector in ``basis``."""
    for b in basis:
        u = u - (u @ b) * b
    return u
