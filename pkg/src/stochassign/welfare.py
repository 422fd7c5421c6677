"""Bounded-weight transform and welfare risk estimators.

Experimental records (outcome, treatment, covariates, propensity) are mapped
to weights confined to the unit interval,

    h = (y * psi / cap) / (e*d + (1-e)*(1-d)),

with covariates rescaled into the unit box and an intercept prepended.  On
top of the weighted sample the module evaluates empirical welfare, the
empirical welfare risk of a deterministic rule, the Monte-Carlo welfare risk
of a stochastic (vMF) rule, and per-individual treatment propensities.  All
operations are pure functions of their inputs plus a seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numba
import numpy as np

from . import vmf

__all__ = [
    "DatasetMeta",
    "WeightedSample",
    "compute_weights",
    "empirical_welfare",
    "empirical_risk",
    "posterior_risk_mc",
    "posterior_risk_detail",
    "propensities_for_features",
    "individual_propensities",
    "propensity_summary",
]


@dataclass(frozen=True)
class DatasetMeta:
    """Sample-level constants fixed at ingestion time.

    outcome_cap is the (cost-adjusted) maximum outcome in the sample,
    overlap is the strict-overlap constant keeping propensities inside
    [overlap, 1 - overlap], covariate_maxima are the per-column positive
    values used to map covariates into the unit box, and cost is the
    per-treated-unit amount already subtracted upstream.
    """

    n: int
    outcome_cap: float
    overlap: float
    covariate_maxima: np.ndarray
    cost: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dataset must contain at least one row")
        if not (self.outcome_cap > 0.0):
            raise ValueError("outcome cap must be positive")
        if not (0.0 < self.overlap <= 0.5):
            raise ValueError("overlap bound must lie in (0, 1/2]")
        maxima = np.asarray(self.covariate_maxima, dtype=np.float64)
        if maxima.ndim != 1 or np.any(maxima <= 0.0):
            raise ValueError("covariate maxima must be a vector of positive values")
        object.__setattr__(self, "covariate_maxima", maxima)

    @property
    def currency_factor(self) -> float:
        """Multiplier cap/overlap mapping unit-interval risk back to currency."""
        return self.outcome_cap / self.overlap


@dataclass(frozen=True)
class WeightedSample:
    """Weighted observations ready for risk evaluation.

    weights lie in [0, 1], treatment is 0/1, features holds the augmented
    covariates (first column identically 1, remaining columns in [0, 1]).
    """

    weights: np.ndarray
    treatment: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        d = np.asarray(self.treatment)
        x = np.asarray(self.features, dtype=np.float64)
        if w.ndim != 1 or d.shape != w.shape or x.shape[0] != w.shape[0]:
            raise ValueError("weights, treatment and features must share the row count")
        if np.any(w < 0.0) or np.any(w > 1.0):
            raise ValueError("weights must lie in [0, 1]")
        if not np.isin(d, (0, 1)).all():
            raise ValueError("treatment must be binary")
        if np.any(x[:, 0] != 1.0):
            raise ValueError("augmented covariates must start with an intercept of 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "treatment", d.astype(np.int8))
        object.__setattr__(self, "features", x)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def dimension(self) -> int:
        return self.features.shape[1]

    @property
    def mean_weight(self) -> float:
        return float(self.weights.mean())


def compute_weights(outcomes, treatment, covariates, propensity, meta: DatasetMeta) -> WeightedSample:
    """Map raw records to bounded weights and unit-box augmented covariates.

    Outcomes are assumed cost-adjusted already; negative adjusted outcomes
    are clamped to weight zero with a warning (the bounds require h in
    [0, 1]).  Propensities violating strict overlap are rejected.
    """
    y = np.asarray(outcomes, dtype=np.float64)
    d = np.asarray(treatment)
    x = np.atleast_2d(np.asarray(covariates, dtype=np.float64))
    e = np.asarray(propensity, dtype=np.float64)
    if e.ndim == 0:
        e = np.full(y.shape, float(e))
    if not (y.shape == d.shape == e.shape) or x.shape[0] != y.shape[0]:
        raise ValueError("outcomes, treatment, covariates and propensity must align")
    if x.shape[1] != meta.covariate_maxima.shape[0]:
        raise ValueError("covariate column count does not match the recorded maxima")
    if np.any(e < meta.overlap - 1e-12) or np.any(e > 1.0 - meta.overlap + 1e-12):
        raise ValueError(
            f"propensity outside [{meta.overlap}, {1 - meta.overlap}]: strict overlap violated"
        )
    if np.any(x < 0.0):
        raise ValueError("covariates must be non-negative for the unit-box normalisation")
    d01 = d.astype(np.float64)
    denom = e * d01 + (1.0 - e) * (1.0 - d01)
    h = (y * meta.overlap / meta.outcome_cap) / denom
    if np.any(h < 0.0):
        warnings.warn(
            f"{int((h < 0).sum())} negative post-adjustment outcomes clamped to weight 0",
            UserWarning,
            stacklevel=2,
        )
        h = np.clip(h, 0.0, None)
    if np.any(h > 1.0 + 1e-12):
        raise ValueError("weights above 1: outcome cap is smaller than an observed outcome")
    h = np.clip(h, 0.0, 1.0)
    features = np.column_stack([np.ones(y.shape[0]), x / meta.covariate_maxima])
    return WeightedSample(weights=h, treatment=d, features=features)


def _agreement_risk(sample: WeightedSample, beta) -> tuple[float, float]:
    beta = np.asarray(beta, dtype=np.float64)
    assigned = sample.features @ beta >= 0.0
    disagree = assigned != (sample.treatment == 1)
    total = float(sample.weights.sum())
    risk_part = float(sample.weights @ disagree)
    return risk_part / sample.n, (total - risk_part) / sample.n


def empirical_welfare(sample: WeightedSample, meta: DatasetMeta, beta) -> float:
    """Empirical welfare of a deterministic rule, in currency units.

    Equals (cap/overlap) * (1/n) * sum of h over rows where the rule agrees
    with the observed treatment, an unbiased estimate of population welfare.
    """
    _, agree_part = _agreement_risk(sample, beta)
    return meta.currency_factor * agree_part


def empirical_risk(sample: WeightedSample, beta) -> float:
    """Empirical welfare risk (1/n) sum h_i 1{rule disagrees with d_i}."""
    risk, _ = _agreement_risk(sample, beta)
    return risk


@numba.njit(fastmath=True, cache=True)
def _signed_sums_3d(x1, x2, signed, b0, b1, b2, out):
    # sum_i signed_i * 1{b0 + b1 x1_i + b2 x2_i >= 0} for every rule j;
    # rows outer so the rule block stays cache-resident
    n = x1.shape[0]
    n_rules = b0.shape[0]
    out[:] = 0.0
    for i in range(n):
        xi1 = x1[i]
        xi2 = x2[i]
        si = signed[i]
        for j in range(n_rules):
            score = b0[j] + b1[j] * xi1 + b2[j] * xi2
            out[j] += si * (score >= 0.0)


def signed_indicator_sums(features: np.ndarray, signed: np.ndarray, rules: np.ndarray) -> np.ndarray:
    """sum_i signed_i * 1{x_i' beta_j >= 0} for every rule j."""
    out = np.empty(rules.shape[0])
    if features.shape[1] == 3:
        _signed_sums_3d(
            np.ascontiguousarray(features[:, 1]),
            np.ascontiguousarray(features[:, 2]),
            np.ascontiguousarray(signed),
            np.ascontiguousarray(rules[:, 0]),
            np.ascontiguousarray(rules[:, 1]),
            np.ascontiguousarray(rules[:, 2]),
            out,
        )
        return out
    transposed = np.ascontiguousarray(features.T)
    block = 128
    for start in range(0, rules.shape[0], block):
        scores = rules[start : start + block] @ transposed
        out[start : start + scores.shape[0]] = (scores >= 0.0) @ signed
    return out


def warm_up_kernels() -> None:
    """Force JIT compilation before worker processes fork."""
    probe = np.array([[1.0, 0.5, 0.5]])
    signed_indicator_sums(probe, np.array([1.0]), probe)


def _per_draw_risks(sample: WeightedSample, draws: np.ndarray) -> np.ndarray:
    """Empirical risk of each drawn rule; draws shared across all rows."""
    h = sample.weights
    d = sample.treatment.astype(np.float64)
    base = float((h * d).sum())  # risk numerator if no row were treated
    signed = h * (1.0 - 2.0 * d)
    return (base + signed_indicator_sums(sample.features, signed, draws)) / sample.n


def posterior_risk_detail(sample: WeightedSample, mu, kappa: float, draws: int, seed) -> tuple[float, float]:
    """Monte-Carlo welfare risk of a vMF rule and its MC standard error."""
    if draws < 1:
        raise ValueError("at least one Monte-Carlo draw is required")
    rules = vmf.sample_vmf(np.asarray(mu, dtype=np.float64), kappa, draws, seed)
    per_draw = _per_draw_risks(sample, rules)
    risk = float(per_draw.mean())
    mcse = float(per_draw.std(ddof=1) / np.sqrt(draws)) if draws > 1 else 0.0
    return risk, mcse


def posterior_risk_mc(sample: WeightedSample, mu, kappa: float, draws: int, seed) -> float:
    """Monte-Carlo estimate of the welfare risk under a vMF rule.

    Draws `draws` rules once, shared across rows, and averages the weighted
    disagreement loss; deterministic for a fixed seed.
    """
    risk, _ = posterior_risk_detail(sample, mu, kappa, draws, seed)
    return risk


def propensities_for_features(features: np.ndarray, mu, kappa: float, draws: int, seed) -> np.ndarray:
    """Treatment probability per covariate row, estimated from shared draws."""
    if draws < 1:
        raise ValueError("at least one Monte-Carlo draw is required")
    rules = vmf.sample_vmf(np.asarray(mu, dtype=np.float64), kappa, draws, seed)
    treated = (np.asarray(features, dtype=np.float64) @ rules.T) >= 0.0
    return treated.mean(axis=1)


def individual_propensities(sample: WeightedSample, mu, kappa: float, draws: int, seed) -> np.ndarray:
    """Per-row treatment probability under a vMF rule, estimated by MC.

    The same shared draws as the risk estimator: the i-th entry is the
    fraction of drawn rules that treat row i.
    """
    return propensities_for_features(sample.features, mu, kappa, draws, seed)


def propensity_summary(propensities: np.ndarray) -> dict[str, float]:
    """Range and decile summary of per-individual treatment propensities."""
    p = np.asarray(propensities, dtype=np.float64)
    return {
        "min": float(p.min()),
        "q10": float(np.quantile(p, 0.10)),
        "q90": float(np.quantile(p, 0.90)),
        "max": float(p.max()),
        "mean": float(p.mean()),
    }
