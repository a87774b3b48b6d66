"""Contaminated-Gaussian Monte Carlo harness.

One replication draws a random covariance ``B diag(lambda) B'`` with
exponential eigenvalues, samples ``n`` shifted Gaussian rows, computes the
clean benchmark direction by classical PCA, appends ``ceil(rate * n)``
outliers ``xbar + exp(kappa) z`` whose direction makes angle ``phi`` with the
benchmark, preprocesses, and scores three estimators by their angle to the
benchmark.

Replications are seeded by ``(seed, rep)`` only, so every (kappa, phi)
cell of a grid sees the same clean samples and outlier directions.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cauchy_pca import CauchyPcaConfig, fit_cauchy_pca
from .errors import CauchyPcaError, DegenerateSampleError, SimulationAbortError
from .linalg import (
    CovarianceModel,
    angle_degrees,
    canonical_sign,
    classical_first_pc,
    orthonormal_basis,
)
from .prep import CenteringSpec, preprocess

logger = logging.getLogger(__name__)

METHODS = ("cauchy", "pp", "classical")
MAD_CONSISTENCY = 1.4826
MAX_FAIL_FRACTION = 0.10
SIM_CENTERING = CenteringSpec(mode="column-median", scale="median-abs-dev")


@dataclass(frozen=True)
class SimScenario:
    """One contamination experiment.  ``kappa=None`` means no outliers."""

    n: int
    p: int
    kappa: float | None = None
    phi_degrees: float = 0.0
    contamination: float = 0.02
    shift: float = 50.0
    eigen_rate: float = 0.4
    reps: int = 30
    seed: int = 0
    # Mean absolute deviation lets far outliers set the column scales, so the
    # harness scales by the median absolute deviation instead.
    centering: CenteringSpec = field(default_factory=lambda: SIM_CENTERING)
    iid_outliers: bool = False

    def __post_init__(self) -> None:
        if self.n < 3 or self.p < 2 or self.reps < 1:
            raise ValueError("need n >= 3, p >= 2 and reps >= 1")
        if not 0.0 <= self.phi_degrees <= 90.0:
            raise ValueError(f"phi must lie in [0, 90], got {self.phi_degrees}")
        if not 0.0 <= self.contamination < 1.0:
            raise ValueError("contamination must lie in [0, 1)")
        if self.eigen_rate <= 0:
            raise ValueError("eigen_rate must be > 0")
        if self.kappa is not None:
            if not math.isfinite(self.kappa):
                raise ValueError("kappa must be finite or None")
            if self.contamination > 0 and self.contamination * self.n < 1 - 1e-9:
                raise ValueError("contamination * n must be >= 1 when outliers are requested")

    @property
    def n_outliers(self) -> int:
        if self.kappa is None or self.contamination == 0.0:
            return 0
        # Guard against 0.02 * 150 = 3.0000000000000004.
        return math.ceil(self.contamination * self.n - 1e-9)


@dataclass(frozen=True)
class TrialResult:
    angle_cauchy: float
    angle_pp: float
    angle_classical: float
    runtimes: dict


@dataclass(frozen=True)
class ScenarioSummary:
    """Averages over the successful replications of one scenario."""

    scenario: SimScenario
    mean_angle: dict
    mean_runtime: dict
    reps_used: int
    reps_failed: int


def population_basis(p: int, eigen_rate: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Eigenbasis and eigenvalues, columns sorted by decreasing eigenvalue."""
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    basis_seed, eig_seed = ss.spawn(2)
    B = orthonormal_basis(basis_seed, p)
    lam = np.random.default_rng(eig_seed).exponential(scale=1.0 / eigen_rate, size=p)
    order = np.argsort(lam)[::-1]
    return B[:, order], lam[order]


def generate_population(p: int, eigen_rate: float = 0.4, seed=0):
    """Random covariance ``B diag(lambda) B'`` and its leading eigenvector."""
    if p < 2:
        raise ValueError("p must be >= 2")
    B, lam = population_basis(p, eigen_rate, seed)
    sigma = (B * lam) @ B.T
    sigma = 0.5 * (sigma + sigma.T)
    return CovarianceModel(sigma=sigma, mu=np.zeros(p)), canonical_sign(B[:, 0])


def _orthogonal_unit(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    while True:
        w = rng.standard_normal(v.size)
        w -= (w @ v) * v
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            return w / norm


def outlier_direction(clean_pc, phi_degrees: float, rng) -> np.ndarray:
    """Unit vector at angle ``phi`` from ``clean_pc``."""
    rng = np.random.default_rng(rng)
    pc = np.asarray(clean_pc, dtype=float)
    phi = math.radians(phi_degrees)
    return math.cos(phi) * pc + math.sin(phi) * _orthogonal_unit(pc, rng)


def make_outlier(xbar, kappa: float, phi_degrees: float, clean_pc, seed=None) -> np.ndarray:
    """``xbar + exp(kappa) z`` with unit ``z`` at angle ``phi`` from ``clean_pc``."""
    if not 0.0 <= phi_degrees <= 90.0:
        raise ValueError(f"phi must lie in [0, 90], got {phi_degrees}")
    z = outlier_direction(clean_pc, phi_degrees, seed)
    return np.asarray(xbar, dtype=float) + math.exp(kappa) * z


def mad_index(c: np.ndarray, axis: int = 0) -> np.ndarray:
    """Consistency-scaled median absolute deviation along ``axis``."""
    med = np.median(c, axis=axis, keepdims=True)
    return MAD_CONSISTENCY * np.median(np.abs(c - med), axis=axis)


def pp_first_pc(
    X, index: str = "mad", *, refine_steps: int = 200, starts: int = 5, seed=0
) -> np.ndarray:
    """Projection-pursuit direction maximizing a robust scale of projections.

    Candidates are the normalized, median-centered data rows plus the
    classical first PC.  The ``starts`` best candidates are each refined by
    ``refine_steps`` random perturbations kept only when they raise the index;
    the step shrinks by 0.9 after a rejection and grows by 1.5 after an
    acceptance.  Only the MAD index is implemented ("qn" falls back to it).
    """
    if index not in ("mad", "qn"):
        raise ValueError(f"unknown projection index {index!r}")
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n < 3:
        raise DegenerateSampleError("projection pursuit needs n >= 3")
    Xc = X - np.median(X, axis=0)
    norms = np.linalg.norm(Xc, axis=1)
    keep = norms > 1e-12 * max(norms.max(), 1e-300)
    if not np.any(keep):
        raise DegenerateSampleError("all rows coincide after centering")
    cands = Xc[keep] / norms[keep, None]
    try:
        cands = np.vstack([cands, classical_first_pc(X)[0]])
    except CauchyPcaError:
        pass
    scores = mad_index(X @ cands.T)
    if scores.max() <= 0.0:
        raise DegenerateSampleError("robust scale is zero in every candidate direction")

    rng = np.random.default_rng(seed)
    best_u, best_val = None, -np.inf
    # Stable sort keeps the order reproducible when scores tie.
    for k in np.argsort(-scores, kind="stable")[:starts]:
        u, val = cands[k], float(scores[k])
        step = 0.1
        for _ in range(refine_steps):
            trial = u + step * rng.standard_normal(p) / math.sqrt(p)
            trial /= np.linalg.norm(trial)
            t_val = float(mad_index(X @ trial))
            if t_val > val:
                u, val = trial, t_val
                step = min(1.0, 1.5 * step)
            else:
                step *= 0.9
        if val > best_val:
            best_u, best_val = u, val
    return canonical_sign(best_u)


def _rep_streams(seed: int, rep: int):
    pop, sample, outlier, method = np.random.SeedSequence([seed, rep]).spawn(4)
    return pop, sample, outlier, method


@dataclass
class _RepData:
    X: np.ndarray
    benchmark: np.ndarray
    outlier_rng_seed: np.random.SeedSequence
    method_seed: int


def _draw_clean(s: SimScenario, rep: int) -> _RepData:
    pop_ss, sample_ss, outlier_ss, method_ss = _rep_streams(s.seed, rep)
    B, lam = population_basis(s.p, s.eigen_rate, pop_ss)
    rng = np.random.default_rng(sample_ss)
    X = (rng.standard_normal((s.n, s.p)) * np.sqrt(lam)) @ B.T + s.shift
    benchmark, _ = classical_first_pc(X)
    return _RepData(X, benchmark, outlier_ss, int(method_ss.generate_state(1)[0]))


def _contaminate(s: SimScenario, data: _RepData) -> np.ndarray:
    m = s.n_outliers
    if m == 0:
        return data.X
    rng = np.random.default_rng(data.outlier_rng_seed)
    xbar = data.X.mean(axis=0)
    if s.iid_outliers:
        Z = np.vstack([outlier_direction(data.benchmark, s.phi_degrees, rng) for _ in range(m)])
    else:
        Z = np.tile(outlier_direction(data.benchmark, s.phi_degrees, rng), (m, 1))
    return np.vstack([data.X, xbar + math.exp(s.kappa) * Z])


def run_trial(s: SimScenario, data: _RepData) -> TrialResult:
    Xc = _contaminate(s, data)
    Xp, _, _ = preprocess(Xc, s.centering)
    runtimes = {}
    t0 = time.perf_counter()
    u_c = fit_cauchy_pca(Xp, CauchyPcaConfig(k=1)).directions[0]
    t1 = time.perf_counter()
    u_pp = pp_first_pc(Xp, seed=data.method_seed)
    t2 = time.perf_counter()
    u_cl, _ = classical_first_pc(Xp)
    t3 = time.perf_counter()
    runtimes = {"cauchy": t1 - t0, "pp": t2 - t1, "classical": t3 - t2}
    b = data.benchmark
    return TrialResult(angle_degrees(u_c, b), angle_degrees(u_pp, b), angle_degrees(u_cl, b), runtimes)


def _run_rep(args) -> list:
    """All grid cells of one replication; ``None`` marks a failed cell."""
    scenarios, rep = args
    try:
        data = _draw_clean(scenarios[0], rep)
    except CauchyPcaError as exc:
        logger.warning("rep %d: clean draw failed: %s", rep, exc)
        return [None] * len(scenarios)
    out = []
    for s in scenarios:
        try:
            out.append(run_trial(s, data))
        except CauchyPcaError as exc:
            logger.warning("rep %d (kappa=%s, phi=%s) failed: %s", rep, s.kappa, s.phi_degrees, exc)
            out.append(None)
    return out


def resolve_workers(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("CPCA_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


def run_grid(scenarios: list[SimScenario], threads: int | None = None) -> list[ScenarioSummary]:
    """Run scenarios that differ only in ``kappa``/``phi`` over shared replications.

    Results do not depend on ``threads``: replications are seeded by index and
    averages use exactly rounded summation.
    """
    if not scenarios:
        return []
    base = scenarios[0]
    for s in scenarios[1:]:
        if replace(s, kappa=base.kappa, phi_degrees=base.phi_degrees) != base:
            raise ValueError("grid scenarios may differ only in kappa and phi")
    workers = min(resolve_workers(threads), base.reps)
    tasks = [(scenarios, rep) for rep in range(base.reps)]
    if workers == 1:
        per_rep = [_run_rep(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(_run_rep, tasks))

    summaries = []
    for i, s in enumerate(scenarios):
        trials = [rep_out[i] for rep_out in per_rep if rep_out[i] is not None]
        failed = base.reps - len(trials)
        if failed > MAX_FAIL_FRACTION * base.reps:
            raise SimulationAbortError(
                f"{failed} of {base.reps} replications failed (kappa={s.kappa}, phi={s.phi_degrees})"
            )
        angles = {
            "cauchy": [t.angle_cauchy for t in trials],
            "pp": [t.angle_pp for t in trials],
            "classical": [t.angle_classical for t in trials],
        }
        k = len(trials)
        summaries.append(ScenarioSummary(
            scenario=s,
            mean_angle={m: math.fsum(v) / k for m, v in angles.items()},
            mean_runtime={m: math.fsum(t.runtimes[m] for t in trials) / k for m in METHODS},
            reps_used=k,
            reps_failed=failed,
        ))
    return summaries


def run_scenario(s: SimScenario, threads: int | None = None) -> ScenarioSummary:
    return run_grid([s], threads)[0]


def scenario_grid(base: SimScenario, kappas, phis) -> list[SimScenario]:
    return [replace(base, kappa=k, phi_degrees=float(phi)) for phi in phis for k in kappas]
