import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from stochassign import DeterministicAssignmentPolicy, StochasticAssignmentPolicy
from stochassign.policy import les_assign


def trial_arrays(rng, n=60):
    X = rng.uniform(0.0, 1.0, (n, 2))
    y = rng.uniform(0.0, 2.0, n)
    d = rng.integers(0, 2, n)
    return X, y, d


@pytest.fixture
def fitted(rng):
    X, y, d = trial_arrays(rng)
    model = StochasticAssignmentPolicy(
        sphere_points=60, kappa_max=1.0, kappa_step=0.5, draws=50, random_state=5
    )
    return model.fit(X, y, treatment=d, propensity=2.0 / 3.0), X


class TestStochasticPolicy:
    def test_get_set_params_roundtrip(self):
        model = StochasticAssignmentPolicy(draws=123, kappa_max=2.5)
        cloned = clone(model)
        assert cloned.get_params()["draws"] == 123
        assert cloned.get_params()["kappa_max"] == 2.5

    def test_fit_sets_attributes(self, fitted):
        model, _ = fitted
        assert np.linalg.norm(model.mu_) == pytest.approx(1.0, abs=1e-12)
        assert model.kappa_ >= 0.0
        assert model.objective_ == pytest.approx(model.result_.objective)
        assert model.meta_.overlap == pytest.approx(1.0 / 3.0)

    def test_requires_treatment_and_propensity(self, rng):
        X, y, d = trial_arrays(rng)
        model = StochasticAssignmentPolicy(sphere_points=40, kappa_max=0.5, kappa_step=0.5, draws=20)
        with pytest.raises(ValueError, match="treatment"):
            model.fit(X, y)
        with pytest.raises(ValueError, match="propensity"):
            model.fit(X, y, treatment=d)

    def test_predict_proba_shape_and_range(self, fitted):
        model, X = fitted
        proba = model.predict_proba(X)
        assert proba.shape == (X.shape[0], 2)
        assert np.allclose(proba.sum(axis=1), 1.0)
        assert proba.min() >= 0.0 and proba.max() <= 1.0

    def test_predict_binary_and_deterministic(self, fitted):
        model, X = fitted
        first = model.predict(X)
        second = model.predict(X)
        assert set(np.unique(first)) <= {0, 1}
        assert np.array_equal(first, second)

    def test_predict_before_fit_raises(self, rng):
        X, _, _ = trial_arrays(rng)
        with pytest.raises(NotFittedError):
            StochasticAssignmentPolicy().predict(X)

    def test_feature_count_checked(self, fitted, rng):
        model, _ = fitted
        with pytest.raises(ValueError, match="features"):
            model.predict(rng.uniform(0, 1, (5, 3)))

    def test_fit_deterministic_in_random_state(self, rng):
        X, y, d = trial_arrays(rng)
        params = dict(sphere_points=50, kappa_max=1.0, kappa_step=0.5, draws=40, random_state=9)
        a = StochasticAssignmentPolicy(**params).fit(X, y, treatment=d, propensity=0.5)
        b = StochasticAssignmentPolicy(**params).fit(X, y, treatment=d, propensity=0.5)
        assert np.array_equal(a.mu_, b.mu_) and a.kappa_ == b.kappa_


class TestDeterministicPolicy:
    def test_fit_predict(self, rng):
        X, y, d = trial_arrays(rng)
        model = DeterministicAssignmentPolicy(sphere_points=80).fit(
            X, y, treatment=d, propensity=2.0 / 3.0
        )
        assert np.linalg.norm(model.beta_) == pytest.approx(1.0, abs=1e-12)
        predictions = model.predict(X)
        augmented = np.column_stack([np.ones(X.shape[0]), X / model.covariate_maxima_])
        assert np.array_equal(predictions, les_assign(model.beta_, augmented))

    def test_zero_risk_dataset(self, rng):
        X = rng.uniform(0.0, 1.0, (50, 2))
        model = DeterministicAssignmentPolicy(sphere_points=200)
        d = (0.5 + X[:, 0] - X[:, 1] >= 0).astype(int)
        y = rng.uniform(0.5, 1.0, 50)
        model.fit(X, y, treatment=d, propensity=0.5)
        assert model.risk_ <= 0.02
