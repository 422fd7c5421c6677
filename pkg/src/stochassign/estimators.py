"""Scikit-learn estimator wrappers around the rule search.

`StochasticAssignmentPolicy` learns a von Mises-Fisher distribution over
linear eligibility rules from experimental data and then assigns treatment
by drawing one rule per individual; `DeterministicAssignmentPolicy` is the
sharp welfare-maximising baseline on the same rule class.  Both follow the
fit/predict/get_params protocol so they compose with pipelines and model
selection utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .dataio import prepare_arrays
from .gridfit import FitConfig, best_deterministic, fit
from .policy import build_grid, les_assign
from .seeding import seed_chain
from .vmf import sample_vmf
from .welfare import propensities_for_features

__all__ = ["StochasticAssignmentPolicy", "DeterministicAssignmentPolicy"]


class _PolicyBase(BaseEstimator):
    def _validate_fit_inputs(self, X, y, treatment, propensity):
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        y = check_array(y, dtype=np.float64, ensure_2d=False)
        if treatment is None:
            raise ValueError("fit requires the observed treatment indicator")
        if propensity is None:
            raise ValueError(
                "fit requires the experimental propensity (scalar or per-row)"
            )
        treatment = check_array(treatment, dtype=None, ensure_2d=False)
        check_consistent_length(X, y, treatment)
        self.n_features_in_ = X.shape[1]
        return X, y, treatment, propensity

    def _augment(self, X) -> np.ndarray:
        check_is_fitted(self, "covariate_maxima_")
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features; the policy was fitted with {self.n_features_in_}"
            )
        return np.column_stack([np.ones(X.shape[0]), X / self.covariate_maxima_])


class StochasticAssignmentPolicy(_PolicyBase):
    """Randomised assignment rule minimising a welfare-risk bound.

    Fitting runs an exhaustive grid search over mean directions on the unit
    sphere and concentrations on an evenly spaced lattice, scoring each cell
    by Monte-Carlo welfare risk plus a KL complexity penalty.  After fitting,
    `predict_proba` reports each individual's treatment probability under the
    learned distribution and `predict` draws one rule per individual.

    Parameters
    ----------
    sphere_points : size of the direction grid.
    kappa_max, kappa_step : concentration lattice (always includes 0).
    draws : Monte-Carlo rule draws per grid cell.
    epsilon : confidence level of the bound.
    overlap : strict-overlap constant; None derives the largest valid value.
    cost : per-treated-unit amount subtracted from treated outcomes.
    random_state : master seed; all internal streams derive from it.
    threads : worker processes for the grid search (0 = CPU count).
    """

    def __init__(
        self,
        sphere_points: int = 10_116,
        kappa_max: float = 5.0,
        kappa_step: float = 0.01,
        draws: int = 1000,
        epsilon: float = 0.05,
        overlap: float | None = None,
        cost: float = 0.0,
        random_state: int = 0,
        threads: int = 1,
    ):
        self.sphere_points = sphere_points
        self.kappa_max = kappa_max
        self.kappa_step = kappa_step
        self.draws = draws
        self.epsilon = epsilon
        self.overlap = overlap
        self.cost = cost
        self.random_state = random_state
        self.threads = threads

    def fit(self, X, y, treatment=None, propensity=None):
        """Learn (mu, kappa) from outcomes, treatments and covariates."""
        X, y, treatment, propensity = self._validate_fit_inputs(X, y, treatment, propensity)
        sample, meta, _ = prepare_arrays(
            y, treatment, X, propensity, cost=self.cost, psi=self.overlap
        )
        config = FitConfig(
            sphere_points=self.sphere_points,
            kappa_max=self.kappa_max,
            kappa_step=self.kappa_step,
            draws=self.draws,
            epsilon=self.epsilon,
            seed=self.random_state,
        )
        result = fit(sample, meta, config, threads=self.threads)
        self.result_ = result
        self.mu_ = result.mu
        self.kappa_ = result.kappa
        self.objective_ = result.objective
        self.risk_ = result.risk
        self.kl_ = result.kl
        self.meta_ = meta
        self.covariate_maxima_ = meta.covariate_maxima
        return self

    def predict_proba(self, X):
        """Treatment probability per row under the fitted rule distribution."""
        check_is_fitted(self, "mu_")
        features = self._augment(X)
        p = propensities_for_features(
            features, self.mu_, self.kappa_, self.draws, seed_chain(self.random_state, 7)
        )
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        """Draw one rule per individual and return the 0/1 assignments."""
        check_is_fitted(self, "mu_")
        features = self._augment(X)
        rules = sample_vmf(
            self.mu_, self.kappa_, features.shape[0], seed_chain(self.random_state, 8)
        )
        return (np.einsum("ij,ij->i", features, rules) >= 0.0).astype(np.int8)


class DeterministicAssignmentPolicy(_PolicyBase):
    """Sharp welfare-maximising linear rule over a sphere grid."""

    def __init__(
        self,
        sphere_points: int = 10_116,
        overlap: float | None = None,
        cost: float = 0.0,
    ):
        self.sphere_points = sphere_points
        self.overlap = overlap
        self.cost = cost

    def fit(self, X, y, treatment=None, propensity=None):
        X, y, treatment, propensity = self._validate_fit_inputs(X, y, treatment, propensity)
        sample, meta, _ = prepare_arrays(
            y, treatment, X, propensity, cost=self.cost, psi=self.overlap
        )
        grid = build_grid(sample.dimension, self.sphere_points)
        self.beta_, self.risk_ = best_deterministic(sample, grid)
        self.meta_ = meta
        self.covariate_maxima_ = meta.covariate_maxima
        return self

    def predict(self, X):
        check_is_fitted(self, "beta_")
        return les_assign(self.beta_, self._augment(X))
