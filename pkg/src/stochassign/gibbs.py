"""Exact Gibbs posterior over a finite policy set and the welfare-risk bound.

The optimal update of a prior over finitely many rules is an exponential
tilt by the empirical welfare risk, w_i proportional to p_i exp(-chi r_i),
with the tilting constant chi pinned down by the fixed-point equation

    chi = 4n * sqrt((KL(posterior || prior) + ln(2 sqrt(n)/eps)) / (2n)).

The same module exposes the high-probability bound

    risk_bound = posterior_risk + sqrt((KL + ln(2 sqrt(n)/eps)) / (2n)),

valid for n >= 8, which doubles as the objective the variational search
minimises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BoundConfig",
    "DiscretePolicySet",
    "DiscretePosterior",
    "log_confidence_term",
    "penalty",
    "pac_bound",
    "objective_value",
    "tilt",
    "solve_chi",
]


@dataclass(frozen=True)
class BoundConfig:
    """Sample size and confidence level entering the bound; needs n >= 8."""

    n: int
    epsilon: float = 0.05

    def __post_init__(self):
        if self.n < 8:
            raise ValueError(f"the bound requires n >= 8, got n = {self.n}")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must lie in (0, 1)")


def log_confidence_term(n: int, epsilon: float) -> float:
    """ln(2 sqrt(n) / epsilon)."""
    return math.log(2.0 * math.sqrt(n) / epsilon)


def penalty(kl: float, bounds: BoundConfig) -> float:
    """Complexity penalty sqrt((KL + ln(2 sqrt(n)/eps)) / (2n))."""
    if kl < 0:
        raise ValueError("KL divergence cannot be negative")
    return math.sqrt((kl + log_confidence_term(bounds.n, bounds.epsilon)) / (2.0 * bounds.n))


def pac_bound(posterior_risk: float, kl: float, bounds: BoundConfig) -> float:
    """High-probability upper bound on the population welfare risk."""
    return posterior_risk + penalty(kl, bounds)


def objective_value(posterior_risk: float, kl: float, bounds: BoundConfig) -> float:
    """The quantity the optimal posterior minimises; same formula as the bound."""
    return pac_bound(posterior_risk, kl, bounds)


@dataclass(frozen=True)
class DiscretePolicySet:
    """Finite set of rules with a prior and per-rule empirical welfare risks."""

    risks: np.ndarray
    prior: np.ndarray
    atoms: np.ndarray | None = None

    def __post_init__(self):
        risks = np.asarray(self.risks, dtype=np.float64)
        prior = np.asarray(self.prior, dtype=np.float64)
        if risks.ndim != 1 or prior.shape != risks.shape:
            raise ValueError("risks and prior must be vectors of equal length")
        if np.any(risks < 0.0) or np.any(risks > 1.0):
            raise ValueError("risks must lie in [0, 1]")
        if np.any(prior < 0.0) or abs(prior.sum() - 1.0) > 1e-12:
            raise ValueError("prior weights must be non-negative and sum to 1")
        if not np.any(prior > 0.0):
            raise ValueError("prior places no mass on any atom")
        object.__setattr__(self, "risks", risks)
        object.__setattr__(self, "prior", prior)

    @classmethod
    def with_uniform_prior(cls, risks, atoms=None) -> "DiscretePolicySet":
        risks = np.asarray(risks, dtype=np.float64)
        return cls(risks=risks, prior=np.full(risks.shape, 1.0 / risks.size), atoms=atoms)

    @property
    def size(self) -> int:
        return self.risks.shape[0]


@dataclass(frozen=True)
class DiscretePosterior:
    """Tilted posterior with its tilting constant and diagnostics."""

    weights: np.ndarray
    chi: float
    kl: float
    posterior_risk: float
    residual: float = 0.0

    def to_report(self, pset: DiscretePolicySet, bounds: BoundConfig) -> dict:
        """JSON-ready record: atoms, prior, posterior, chi, KL, risk, bound."""
        report = {
            "prior": pset.prior.tolist(),
            "risks": pset.risks.tolist(),
            "posterior": self.weights.tolist(),
            "chi": self.chi,
            "kl": self.kl,
            "posterior_risk": self.posterior_risk,
            "fixed_point_residual": self.residual,
            "bound": pac_bound(self.posterior_risk, self.kl, bounds),
            "n": bounds.n,
            "epsilon": bounds.epsilon,
        }
        if pset.atoms is not None:
            report["atoms"] = np.asarray(pset.atoms).tolist()
        return report


def tilt(pset: DiscretePolicySet, chi: float) -> DiscretePosterior:
    """Exponentially tilt the prior: w_i proportional to p_i exp(-chi r_i).

    Evaluated with max-subtraction so that arbitrarily large chi cannot
    overflow; the KL divergence uses the identity
    KL = -chi * posterior_risk - ln Z to stay exact when weights underflow.
    """
    if chi < 0:
        raise ValueError("the tilting constant must be non-negative")
    scores = -chi * pset.risks
    support = pset.prior > 0.0
    top = scores[support].max()
    scaled = np.where(support, pset.prior * np.exp(scores - top), 0.0)
    z_scaled = scaled.sum()
    weights = scaled / z_scaled
    posterior_risk = float(weights @ pset.risks)
    log_z = top + math.log(z_scaled)
    kl = max(0.0, -chi * posterior_risk - log_z)
    return DiscretePosterior(weights=weights, chi=chi, kl=kl, posterior_risk=posterior_risk)


def solve_chi(pset: DiscretePolicySet, bounds: BoundConfig) -> DiscretePosterior:
    """Solve the tilting fixed point by bracketing and bisection.

    The KL divergence of the tilted posterior is nondecreasing in chi, so
    chi - 4n*penalty(KL(chi)) crosses zero; the bracket doubles upward from
    chi = 1 (the KL of a finite set is bounded by -ln of the smallest prior
    weight, so a finite bracket always exists) and bisection returns the
    smallest root found, with the residual recorded.
    """

    def gap(chi: float) -> float:
        post = tilt(pset, chi)
        return chi - 4.0 * bounds.n * penalty(post.kl, bounds)

    lo, hi = 0.0, 1.0
    while gap(hi) < 0.0:
        lo, hi = hi, hi * 2.0
        if hi > 1e18:
            raise ArithmeticError("failed to bracket the tilting fixed point")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    chi = 0.5 * (lo + hi)
    post = tilt(pset, chi)
    residual = abs(chi - 4.0 * bounds.n * penalty(post.kl, bounds))
    return DiscretePosterior(
        weights=post.weights,
        chi=chi,
        kl=post.kl,
        posterior_risk=post.posterior_risk,
        residual=residual,
    )
