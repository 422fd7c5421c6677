"""Grid-search minimisation of the welfare-risk bound over vMF rules.

The objective for a candidate (mu, kappa) is the Monte-Carlo welfare risk
plus the complexity penalty; the penalty depends on kappa only, so it is
precomputed per concentration while the risk term is re-estimated with an
independent seeded stream for every (direction, concentration) grid cell.
Cell seeds derive from (master seed, cell index), which makes threaded
evaluation bit-identical to the sequential one.  The module also produces
concentration profiles, sphere heatmaps, the deterministic welfare-
maximising baseline, and the theoretical regret decay bound.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import gibbs, vmf
from .policy import SphereGrid, build_grid, to_spherical
from .seeding import seed_chain
from .welfare import (
    DatasetMeta,
    WeightedSample,
    posterior_risk_detail,
    signed_indicator_sums,
    warm_up_kernels,
)

__all__ = [
    "FitConfig",
    "FitResult",
    "objective",
    "fit",
    "kappa_profile",
    "risk_heatmap",
    "best_deterministic",
    "regret_rate_bound",
    "estimate_margin_constant",
]

# stream namespaces, so profiles and heatmaps never reuse fit draws
_FIT_TAG = 0
_PROFILE_TAG = 1
_HEATMAP_TAG = 2


@dataclass(frozen=True)
class FitConfig:
    """Search grids and Monte-Carlo settings for one fit."""

    sphere_points: int = 10_116
    kappa_max: float = 5.0
    kappa_step: float = 0.01
    draws: int = 1000
    epsilon: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.sphere_points < 2:
            raise ValueError("the sphere grid needs at least two points")
        if self.kappa_max < 0 or self.kappa_step <= 0:
            raise ValueError("kappa grid must have kappa_max >= 0 and a positive step")
        if self.draws < 1:
            raise ValueError("at least one Monte-Carlo draw per cell is required")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must lie in (0, 1)")

    def kappa_grid(self) -> np.ndarray:
        """Concentration lattice 0, step, 2*step, ..., kappa_max."""
        count = int(round(self.kappa_max / self.kappa_step))
        return np.round(np.arange(count + 1) * self.kappa_step, 12)


@dataclass(frozen=True)
class FitResult:
    """Minimiser of the bound objective plus the full grid trace."""

    mu: np.ndarray
    kappa: float
    objective: float
    risk: float
    risk_mcse: float
    kl: float
    penalty: float
    n: int
    epsilon: float
    draws: int
    seed: int
    currency_factor: float
    trace: dict = field(repr=False)

    @property
    def objective_currency(self) -> float:
        return self.objective * self.currency_factor

    @property
    def risk_currency(self) -> float:
        return self.risk * self.currency_factor

    def to_dict(self) -> dict:
        theta, phi = (to_spherical(self.mu) if self.mu.shape[0] == 3 else (None, None))
        return {
            "mu": self.mu.tolist(),
            "theta_deg": theta,
            "phi_deg": phi,
            "kappa": self.kappa,
            "objective": self.objective,
            "risk": self.risk,
            "risk_mcse": self.risk_mcse,
            "kl": self.kl,
            "penalty": self.penalty,
            "objective_currency": self.objective_currency,
            "risk_currency": self.risk_currency,
            "n": self.n,
            "epsilon": self.epsilon,
            "draws": self.draws,
            "seed": self.seed,
        }


def objective(sample: WeightedSample, mu, kappa: float, bounds: gibbs.BoundConfig, draws: int, seed) -> float:
    """Monte-Carlo risk of vMF(mu, kappa) plus the KL penalty."""
    risk, _ = posterior_risk_detail(sample, mu, kappa, draws, seed)
    return risk + gibbs.penalty(vmf.kl_to_uniform(sample.dimension, kappa), bounds)


def _evaluate_block(
    sample: WeightedSample,
    points: np.ndarray,
    sphere_offset: int,
    kappas: np.ndarray,
    draws: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Risk and MCSE for every (point, kappa) cell of one sphere-point block."""
    n_kappa = kappas.shape[0]
    risks = np.empty((points.shape[0], n_kappa))
    mcses = np.empty_like(risks)
    for i, mu in enumerate(points):
        base_cell = (sphere_offset + i) * n_kappa
        for k, kappa in enumerate(kappas):
            cell_seed = seed_chain(seed, _FIT_TAG, base_cell + k)
            risks[i, k], mcses[i, k] = posterior_risk_detail(sample, mu, float(kappa), draws, cell_seed)
    return risks, mcses


def _worker(args) -> tuple[np.ndarray, np.ndarray]:
    sample, points, offset, kappas, draws, seed = args
    with threadpool_limits(limits=1):
        return _evaluate_block(sample, points, offset, kappas, draws, seed)


def _resolve_threads(threads: int) -> int:
    if threads < 0:
        raise ValueError("threads must be >= 0 (0 selects the CPU count)")
    return threads if threads > 0 else (os.cpu_count() or 1)


def fit(
    sample: WeightedSample,
    meta: DatasetMeta,
    config: FitConfig,
    grid: SphereGrid | None = None,
    threads: int = 1,
) -> FitResult:
    """Exhaustive bound minimisation over the sphere grid x kappa lattice.

    Ties are broken towards the smaller concentration and then the
    lexicographically smaller spherical coordinates, so the result does not
    depend on grid ordering or on how cells are scheduled across workers.
    """
    bounds = gibbs.BoundConfig(n=sample.n, epsilon=config.epsilon)
    if grid is None:
        grid = build_grid(sample.dimension, config.sphere_points)
    if grid.dimension != sample.dimension:
        raise ValueError("grid dimension does not match the sample")
    kappas = config.kappa_grid()
    penalties = np.array(
        [gibbs.penalty(vmf.kl_to_uniform(sample.dimension, float(k)), bounds) for k in kappas]
    )
    kls = np.array([vmf.kl_to_uniform(sample.dimension, float(k)) for k in kappas])

    workers = _resolve_threads(threads)
    n_points = grid.count
    warm_up_kernels()  # compile before forking so workers inherit the kernel
    if workers == 1:
        with threadpool_limits(limits=1):
            risks, mcses = _evaluate_block(sample, grid.points, 0, kappas, config.draws, config.seed)
    else:
        chunk = max(1, math.ceil(n_points / (workers * 4)))
        tasks = [
            (sample, grid.points[start : start + chunk], start, kappas, config.draws, config.seed)
            for start in range(0, n_points, chunk)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_worker, tasks))
        risks = np.vstack([p[0] for p in parts])
        mcses = np.vstack([p[1] for p in parts])

    objectives = risks + penalties[None, :]

    if sample.dimension == 3:
        coords = np.array([to_spherical(p) for p in grid.points])
        tie_cols = (coords[:, 0], coords[:, 1])
    else:
        tie_cols = tuple(grid.points[:, j] for j in range(sample.dimension))

    # canonical winner: objective, then kappa, then spherical coordinates
    flat_obj = objectives.ravel()
    flat_kappa = np.tile(kappas, n_points)
    keys = [np.repeat(col, kappas.shape[0]) for col in tie_cols][::-1]
    order = np.lexsort(tuple(keys) + (flat_kappa, flat_obj))
    best = order[0]
    best_point, best_k = divmod(best, kappas.shape[0])

    trace = {
        "point_index": np.repeat(np.arange(n_points), kappas.shape[0]),
        "kappa": flat_kappa,
        "objective": flat_obj,
        "risk": risks.ravel(),
        "risk_mcse": mcses.ravel(),
        "kl": np.tile(kls, n_points),
        "penalty": np.tile(penalties, n_points),
        "points": grid.points,
    }
    if sample.dimension == 3:
        trace["theta_deg"] = np.repeat(coords[:, 0], kappas.shape[0])
        trace["phi_deg"] = np.repeat(coords[:, 1], kappas.shape[0])

    return FitResult(
        mu=grid.points[best_point].copy(),
        kappa=float(kappas[best_k]),
        objective=float(objectives[best_point, best_k]),
        risk=float(risks[best_point, best_k]),
        risk_mcse=float(mcses[best_point, best_k]),
        kl=float(kls[best_k]),
        penalty=float(penalties[best_k]),
        n=sample.n,
        epsilon=config.epsilon,
        draws=config.draws,
        seed=config.seed,
        currency_factor=meta.currency_factor,
        trace=trace,
    )


def kappa_profile(
    sample: WeightedSample,
    meta: DatasetMeta,
    mu,
    config: FitConfig,
) -> dict[str, np.ndarray]:
    """Objective and risk along the concentration lattice at a fixed direction."""
    bounds = gibbs.BoundConfig(n=sample.n, epsilon=config.epsilon)
    kappas = config.kappa_grid()
    rows = {
        "kappa": kappas,
        "risk": np.empty_like(kappas),
        "risk_mcse": np.empty_like(kappas),
        "kl": np.empty_like(kappas),
        "penalty": np.empty_like(kappas),
        "objective": np.empty_like(kappas),
    }
    with threadpool_limits(limits=1):
        for k, kappa in enumerate(kappas):
            risk, mcse = posterior_risk_detail(
                sample, mu, float(kappa), config.draws, seed_chain(config.seed, _PROFILE_TAG, k)
            )
            kl = vmf.kl_to_uniform(sample.dimension, float(kappa))
            rows["risk"][k] = risk
            rows["risk_mcse"][k] = mcse
            rows["kl"][k] = kl
            rows["penalty"][k] = gibbs.penalty(kl, bounds)
            rows["objective"][k] = risk + rows["penalty"][k]
    rows["objective_currency"] = rows["objective"] * meta.currency_factor
    rows["risk_currency"] = rows["risk"] * meta.currency_factor
    return rows


def _deterministic_risks(sample: WeightedSample, points: np.ndarray) -> np.ndarray:
    """Empirical welfare risk of every grid rule."""
    h = sample.weights
    d = sample.treatment.astype(np.float64)
    base = float((h * d).sum())
    signed = h * (1.0 - 2.0 * d)
    return (base + signed_indicator_sums(sample.features, signed, points)) / sample.n


def risk_heatmap(
    sample: WeightedSample,
    config: FitConfig,
    mode: str = "deterministic",
    kappa: float | None = None,
    grid: SphereGrid | None = None,
) -> dict[str, np.ndarray]:
    """Welfare risk over the sphere: per deterministic rule, or per vMF centre.

    Deterministic mode evaluates the empirical risk of each grid rule;
    posterior mode holds `kappa` fixed and re-centres the vMF distribution
    at each grid point, estimating the risk by seeded Monte Carlo.  Only
    defined for 3-dimensional rules (the spherical projection).
    """
    if sample.dimension != 3:
        raise ValueError("heatmaps are defined for 3-dimensional rules only")
    if mode not in ("deterministic", "posterior"):
        raise ValueError(f"unknown heatmap mode {mode!r}")
    if grid is None:
        grid = build_grid(3, config.sphere_points)
    coords = np.array([to_spherical(p) for p in grid.points])
    if mode == "deterministic":
        risks = _deterministic_risks(sample, grid.points)
    else:
        if kappa is None:
            raise ValueError("posterior mode needs a concentration value")
        risks = np.empty(grid.count)
        if kappa == 0.0:
            # the uniform distribution ignores the centre: the map is constant
            value, _ = posterior_risk_detail(
                sample, grid.points[0], 0.0, config.draws, seed_chain(config.seed, _HEATMAP_TAG, 0)
            )
            risks[:] = value
        else:
            with threadpool_limits(limits=1):
                for i, mu in enumerate(grid.points):
                    risks[i], _ = posterior_risk_detail(
                        sample, mu, float(kappa), config.draws, seed_chain(config.seed, _HEATMAP_TAG, i)
                    )
    return {
        "theta_deg": coords[:, 0],
        "phi_deg": coords[:, 1],
        "risk": risks,
        "points": grid.points,
    }


def best_deterministic(sample: WeightedSample, grid: SphereGrid) -> tuple[np.ndarray, float]:
    """Deterministic welfare-maximising rule on a grid (the sharp baseline).

    Returns the grid rule with minimal empirical welfare risk; ties go to
    the lexicographically smallest spherical coordinates.
    """
    if grid.count < 1:
        raise ValueError("grid must be nonempty")
    risks = _deterministic_risks(sample, grid.points)
    if grid.dimension == 3:
        coords = np.array([to_spherical(p) for p in grid.points])
        order = np.lexsort((coords[:, 1], coords[:, 0], risks))
    else:
        order = np.lexsort(tuple(grid.points[:, j] for j in range(grid.dimension))[::-1] + (risks,))
    best = order[0]
    return grid.points[best].copy(), float(risks[best])


def regret_rate_bound(n: int, m: int, margin_c: float, epsilon: float = 0.05) -> tuple[float, float]:
    """Rate constant of the welfare-regret decay bound and its value at n.

    Returns (constant, constant * ln(n) / sqrt(n)); unit-interval scale,
    so currency comparisons multiply by cap/overlap.  Requires n >= 8.
    """
    if n < 8:
        raise ValueError("the regret bound requires n >= 8")
    if margin_c <= 0:
        raise ValueError("the margin constant must be positive")
    oc = vmf.OrderConstants.from_dimension(m)
    ln8, ln9 = math.log(8.0), math.log(9.0)
    constant = (
        4.0 * margin_c * math.sqrt(oc.nu + 1.0)
        + 1.0
        + oc.c_low * ln9 / ln8
        + 1.0
        + math.log(1.0 / epsilon)
        + math.sqrt(oc.c_low * ln9 / (2.0 * ln8))
        + math.sqrt(0.5 * math.log(4.0 * math.e / epsilon))
        + math.sqrt(ln8) / (math.sqrt(2.0) * ln8)
    )
    return constant, constant * math.log(n) / math.sqrt(n)


def estimate_margin_constant(features: np.ndarray, seed=0, pairs: int = 400) -> float:
    """Data-driven margin constant: how fast assignments flip between rules.

    Samples pairs of nearby directions and returns the largest observed
    ratio of the sign-flip fraction to the pair distance.  A crude but
    honest calibration for the regret decay bound.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(features, dtype=np.float64)
    m = x.shape[1]
    ratio = 0.0
    for _ in range(pairs):
        a = rng.standard_normal(m)
        a /= np.linalg.norm(a)
        step = 10.0 ** rng.uniform(-2.0, -0.3)
        b = a + step * rng.standard_normal(m)
        b /= np.linalg.norm(b)
        dist = float(np.linalg.norm(a - b))
        if dist < 1e-9:
            continue
        flips = float(np.mean(((x @ a) >= 0.0) != ((x @ b) >= 0.0)))
        ratio = max(ratio, flips / dist)
    return max(ratio, 1e-6)
