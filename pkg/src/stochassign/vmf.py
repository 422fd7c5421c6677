"""von Mises-Fisher distribution engine.

Everything the rest of the toolkit needs from directional statistics lives
here: log modified Bessel functions of the first kind, the mean resultant
length A_m(kappa) = I_{m/2}(kappa)/I_{m/2-1}(kappa), the exact KL divergence
of a vMF distribution from the uniform measure on the sphere, closed-form
upper bounds on the KL divergence and on the circular variance, first and
second moments, and seeded sampling (Wood's rejection scheme for general
dimension, plus an inversion sampler on the circle used as a test oracle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

__all__ = [
    "OrderConstants",
    "log_bessel_i",
    "bessel_ratio",
    "bessel_ratio_bounds",
    "kl_to_uniform",
    "kl_upper_bound",
    "circular_variance",
    "cv_upper_bound",
    "vmf_moments",
    "sample_vmf",
    "sample_uniform_sphere",
    "sample_circle_inversion",
]

# Switch point between the defining power series and the large-argument
# asymptotic expansion of I_nu.
_SERIES_CUTOFF = 20.0


@dataclass(frozen=True)
class OrderConstants:
    """Bessel order constants attached to an ambient dimension m.

    nu = m/2 - 1 is the Bessel order of the vMF normaliser; c_low and
    c_high are the shifted orders appearing in the two-sided ratio bounds
    (c_high = c_low + 1).
    """

    nu: float
    c_low: float
    c_high: float

    @classmethod
    def from_dimension(cls, m: int) -> "OrderConstants":
        if m < 2:
            raise ValueError(f"sphere dimension must be >= 2, got {m}")
        nu = m / 2.0 - 1.0
        return cls(nu=nu, c_low=nu + 0.5, c_high=nu + 1.5)


def _log_series_factor(nu: float, kappa: float) -> float:
    """ln of the series factor sum_k (kappa^2/4)^k / (k! (nu+1)_k).

    This is ln I_nu(kappa) - nu*ln(kappa/2) + lnGamma(nu+1); it tends to 0
    as kappa -> 0, which makes it the stable building block for small
    concentrations.  All terms are positive so the sum never cancels.
    """
    q = kappa * kappa / 4.0
    total = 1.0
    term = 1.0
    k = 1
    while True:
        term *= q / (k * (nu + k))
        total += term
        if term < total * 1e-18:
            return math.log(total)
        k += 1
        if k > 10_000:  # unreachable for kappa <= _SERIES_CUTOFF
            raise RuntimeError("Bessel series failed to converge")


def _log_bessel_series_logspace(nu: float, kappa: float) -> float:
    """Power series for ln I_nu evaluated in log space (no overflow)."""
    half = math.log(kappa / 2.0)
    k_peak = 0.5 * (math.sqrt((nu + 1.0) ** 2 + kappa * kappa) - (nu + 1.0))
    k_max = int(k_peak + 12.0 * math.sqrt(k_peak + 1.0) + nu + 30.0)
    k = np.arange(k_max + 1, dtype=np.float64)
    log_terms = (2.0 * k + nu) * half - gammaln(k + 1.0) - gammaln(nu + k + 1.0)
    top = log_terms.max()
    return top + math.log(np.exp(log_terms - top).sum())


def _log_bessel_asymptotic(nu: float, kappa: float) -> float:
    """Large-argument expansion of ln I_nu, or NaN if it cannot reach 1e-12."""
    mu4 = 4.0 * nu * nu
    total = 1.0
    term = 1.0
    k = 1
    while True:
        factor = -(mu4 - (2 * k - 1) ** 2) / (8.0 * k * kappa)
        nxt = term * factor
        if abs(nxt) >= abs(term):  # divergent tail reached
            break
        term = nxt
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
        k += 1
    if not (abs(term) < 1e-12 * abs(total)) or total <= 0.0:
        return math.nan
    return kappa - 0.5 * math.log(2.0 * math.pi * kappa) + math.log(total)


def log_bessel_i(nu: float, kappa: float) -> float:
    """ln I_nu(kappa) for nu >= 0, kappa >= 0.

    Uses the defining power series for kappa <= 20 and the large-argument
    asymptotic expansion beyond, falling back to a log-space series when
    the expansion cannot deliver 1e-12 relative accuracy (large order with
    moderate argument).  Returns -inf at kappa = 0 for positive order.
    """
    if nu < 0 or kappa < 0:
        raise ValueError("log_bessel_i requires nu >= 0 and kappa >= 0")
    if kappa == 0.0:
        return 0.0 if nu == 0.0 else -math.inf
    if kappa <= _SERIES_CUTOFF:
        return nu * math.log(kappa / 2.0) - gammaln(nu + 1.0) + _log_series_factor(nu, kappa)
    value = _log_bessel_asymptotic(nu, kappa)
    if math.isnan(value):
        value = _log_bessel_series_logspace(nu, kappa)
    return value


def bessel_ratio_bounds(m: int, kappa: float) -> tuple[float, float]:
    """Two-sided bounds on A_m(kappa), tight as kappa grows."""
    oc = OrderConstants.from_dimension(m)
    lo = kappa / (oc.c_low + math.sqrt(kappa * kappa + oc.c_high * oc.c_high))
    hi = kappa / (oc.c_low + math.sqrt(kappa * kappa + oc.c_low * oc.c_low))
    return lo, hi


def bessel_ratio(m: int, kappa: float) -> float:
    """Mean resultant length A_m(kappa) = I_{m/2}(kappa) / I_{m/2-1}(kappa).

    Evaluated by the downward continued fraction

        r_j = 1 / (2(j+1)/kappa + r_{j+1}),   A_m = r_nu,

    started from the two-sided bound at a depth growing with kappa.  This
    avoids the catastrophic cancellation that subtracting log-Bessel values
    exhibits once kappa is large.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if kappa == 0.0:
        return 0.0
    nu = m / 2.0 - 1.0
    depth = 64 + int(math.sqrt(40.0 * kappa))
    order = nu + depth
    # seed with the midpoint of the ratio bounds at the deep order
    c_lo, c_hi = order + 0.5, order + 1.5
    seed_lo = kappa / (c_lo + math.sqrt(kappa * kappa + c_hi * c_hi))
    seed_hi = kappa / (c_lo + math.sqrt(kappa * kappa + c_lo * c_lo))
    r = 0.5 * (seed_lo + seed_hi)
    for j in range(depth - 1, -1, -1):
        r = 1.0 / (2.0 * (nu + j + 1.0) / kappa + r)
    return r


def kl_to_uniform(m: int, kappa: float) -> float:
    """Exact KL divergence of vMF(mu, kappa) from the uniform sphere measure.

        KL = nu*ln(kappa/2) - ln I_nu(kappa) - lnGamma(nu+1) + A_m(kappa)*kappa

    independent of the mean direction; defined as the limit value 0 at
    kappa = 0 where the raw expansion is indeterminate.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if kappa == 0.0:
        return 0.0
    nu = m / 2.0 - 1.0
    linear = bessel_ratio(m, kappa) * kappa
    if kappa <= _SERIES_CUTOFF:
        # ln I - nu*ln(kappa/2) + lnGamma(nu+1) collapses to the series factor
        return linear - _log_series_factor(nu, kappa)
    return nu * math.log(kappa / 2.0) - log_bessel_i(nu, kappa) - gammaln(nu + 1.0) + linear


def kl_upper_bound(m: int, kappa: float) -> float:
    """Closed-form upper bound on kl_to_uniform, exact at kappa = 0."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    oc = OrderConstants.from_dimension(m)
    s_hi = math.sqrt(kappa * kappa + oc.c_high * oc.c_high)
    log_part = oc.c_low * math.log((oc.c_low + s_hi) / (oc.c_low + oc.c_high))
    # sqrt(k^2+c_low^2) - sqrt(k^2+c_high^2) without cancellation
    s_lo = math.sqrt(kappa * kappa + oc.c_low * oc.c_low)
    diff = (oc.c_low * oc.c_low - oc.c_high * oc.c_high) / (s_lo + s_hi)
    return log_part + diff + 1.0


def circular_variance(m: int, kappa: float) -> float:
    """Circular variance 1 - A_m(kappa), in [0, 1]."""
    return 1.0 - bessel_ratio(m, kappa)


def cv_upper_bound(m: int, kappa: float) -> float:
    """Closed-form upper bound on the circular variance, O(1/kappa)."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    oc = OrderConstants.from_dimension(m)
    s_hi = math.sqrt(kappa * kappa + oc.c_high * oc.c_high)
    # c_low + s_hi - kappa evaluated stably for large kappa
    numer = oc.c_low + oc.c_high * oc.c_high / (s_hi + kappa)
    return numer / (oc.c_low + s_hi)


def vmf_moments(mu: np.ndarray, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and covariance matrix of vMF(mu, kappa).

    E beta = A_m(kappa) mu and
    Var beta = (A_m/kappa) I + (1 - (m/kappa) A_m - A_m^2) mu mu'.
    At kappa = 0 the distribution is uniform: zero mean, covariance I/m.
    """
    mu = np.asarray(mu, dtype=np.float64)
    m = mu.shape[0]
    if kappa == 0.0:
        return np.zeros(m), np.eye(m) / m
    a = bessel_ratio(m, kappa)
    mean = a * mu
    cov = (a / kappa) * np.eye(m) + (1.0 - (m / kappa) * a - a * a) * np.outer(mu, mu)
    return mean, cov


def sample_uniform_sphere(m: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws on the unit sphere via normalised Gaussians."""
    draws = rng.standard_normal((size, m))
    norms = np.linalg.norm(draws, axis=1, keepdims=True)
    # a zero Gaussian vector has probability zero; regenerate defensively
    while np.any(norms == 0.0):
        bad = norms[:, 0] == 0.0
        draws[bad] = rng.standard_normal((int(bad.sum()), m))
        norms = np.linalg.norm(draws, axis=1, keepdims=True)
    return draws / norms


def _wood_radial(kappa: float, m: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Projected coordinate W = mu'beta via Wood's rejection sampler."""
    dim = m - 1
    b = dim / (2.0 * kappa + math.sqrt(4.0 * kappa * kappa + dim * dim))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + dim * math.log(4.0 * b / ((1.0 + b) ** 2))
    out = np.empty(size)
    filled = 0
    while filled < size:
        want = size - filled
        batch = max(32, int(1.3 * want) + 8)
        z = rng.beta(dim / 2.0, dim / 2.0, size=batch)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.uniform(size=batch)
        keep = kappa * w + dim * np.log1p(-x0 * w) - c >= np.log(u)
        accepted = w[keep][:want]
        out[filled : filled + accepted.size] = accepted
        filled += accepted.size
    return out


def sample_vmf(mu: np.ndarray, kappa: float, size: int, seed) -> np.ndarray:
    """Draw `size` unit vectors from vMF(mu, kappa), deterministic per seed.

    Wood's rejection scheme generates the coordinate along mu, a uniform
    draw on the orthogonal sub-sphere supplies the tangent direction, and a
    Householder reflection carries the north-pole frame onto mu.
    """
    rng = np.random.default_rng(seed)
    mu = np.asarray(mu, dtype=np.float64)
    m = mu.shape[0]
    if size < 1:
        raise ValueError("size must be >= 1")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if kappa == 0.0:
        return sample_uniform_sphere(m, size, rng)
    w = _wood_radial(kappa, m, size, rng)
    tangent = sample_uniform_sphere(m - 1, size, rng)
    samples = np.empty((size, m))
    samples[:, 0] = w
    samples[:, 1:] = np.sqrt(np.clip(1.0 - w * w, 0.0, None))[:, None] * tangent
    # reflect e1 onto mu; skip when mu is (numerically) the pole itself
    pole = np.zeros(m)
    pole[0] = 1.0
    u = pole - mu
    norm_sq = float(u @ u)
    if norm_sq > 1e-28:
        samples -= (2.0 / norm_sq) * np.outer(samples @ u, u)
    return samples


def sample_circle_inversion(mu: np.ndarray, kappa: float, size: int, seed) -> np.ndarray:
    """Inversion sampler on the circle (m = 2), used as a sampling oracle."""
    rng = np.random.default_rng(seed)
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape[0] != 2:
        raise ValueError("inversion sampler is defined on the circle only")
    loc = math.atan2(mu[1], mu[0])
    if kappa == 0.0:
        theta = rng.uniform(-math.pi, math.pi, size=size) + loc
    else:
        theta = stats.vonmises.ppf(rng.uniform(size=size), kappa, loc=loc)
    return np.column_stack([np.cos(theta), np.sin(theta)])
