import numpy as np
import pytest

from stochassign.welfare import DatasetMeta, WeightedSample, compute_weights


def random_trial(rng, n=40, m_cov=2, propensity=2.0 / 3.0):
    """Small random experimental dataset with unit-scale outcomes."""
    outcomes = rng.uniform(0.0, 1.0, n)
    treatment = rng.integers(0, 2, n)
    covariates = rng.uniform(0.01, 1.0, (n, m_cov))
    prop = np.full(n, propensity)
    meta = DatasetMeta(
        n=n,
        outcome_cap=float(outcomes.max()),
        overlap=min(propensity, 1.0 - propensity),
        covariate_maxima=covariates.max(axis=0),
    )
    sample = compute_weights(outcomes, treatment, covariates, prop, meta)
    return sample, meta


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def small_sample(rng):
    return random_trial(rng)


def make_sample(weights, treatment, features) -> WeightedSample:
    return WeightedSample(
        weights=np.asarray(weights, dtype=float),
        treatment=np.asarray(treatment),
        features=np.asarray(features, dtype=float),
    )
