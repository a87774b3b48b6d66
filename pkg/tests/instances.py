"""Seeded problem instances shared by the influence tests and the acceptance run."""

from __future__ import annotations

import numpy as np

from cauchypca.cauchy_pca import CauchyPcaConfig, fit_cauchy_pca

SCALES = np.array([2.0, 1.0, 0.5])
TIGHT = CauchyPcaConfig(k=1, outer_tol=1e-9, max_outer_iters=20_000)


def gaussian_3d(rng, n: int) -> np.ndarray:
    return rng.standard_normal((n, 3)) * SCALES


def cauchy_if_instance(seed: int):
    """30x3 sample, an outlier point, and a tight Cauchy fit of the sample."""
    rng = np.random.default_rng(seed)
    X = gaussian_3d(rng, 30)
    z = rng.standard_normal(3) * 2
    res = fit_cauchy_pca(X, TIGHT)
    return X, z, res.directions[0], res.params[0]


def boundedness_instances(count: int = 100, seed: int = 7):
    """Random (X, z) pairs with |z'u| > 0.1, yielded with their Cauchy fit."""
    rng = np.random.default_rng(seed)
    made = 0
    while made < count:
        X = gaussian_3d(rng, 30)
        res = fit_cauchy_pca(X)
        u, th = res.directions[0], res.params[0]
        z = rng.standard_normal(3)
        if abs(z @ u) <= 0.1:
            continue
        made += 1
        yield X, z, u, th


def classical_if_instance(seed: int = 0):
    rng = np.random.default_rng(seed)
    X = gaussian_3d(rng, 50)
    z = X.mean(0) + np.array([3.0, 2.0, -1.5])
    return X, z
