"""scikit-learn style wrappers.

Each estimator is fitted on an arm set given as an ``(K, 2)`` array of
``(mean, variance)`` rows and exposes the learned value as ``value_``.
Hyper-parameters follow the ``get_params``/``set_params`` conventions, so the
estimators can be cloned and used in parameter sweeps.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .arms import extreme_points, make_arms
from .dp import exact_value_dp
from .exceptions import InvalidInputError
from .hjb import Grid, SolverConfig, effective_arms, solve_hjb
from .simulate import SimulationConfig, estimate_Un
from .strategies import Specialize
from .utility import UtilityIndex


def _check_pairs(X) -> np.ndarray:
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != 2:
        raise InvalidInputError(f"expected (mean, variance) rows, got {X.shape[1]} columns")
    if np.any(X[:, 1] < 0):
        raise InvalidInputError("variances must be non-negative")
    return X


def _default_utility(u):
    return UtilityIndex.mean_variance(0.25) if u is None else u


class HJBValueEstimator(BaseEstimator):
    """Limit value ``V`` of the arm set from the HJB PDE.

    ``predict`` evaluates ``v(0, x, y)`` at ``(x, y)`` rows.
    """

    def __init__(self, utility=None, cells=200, epsilon=0.0, frame="centered",
                 boundary_policy="one_sided_upwind", smoothing_width=None):
        self.utility = utility
        self.cells = cells
        self.epsilon = epsilon
        self.frame = frame
        self.boundary_policy = boundary_policy
        self.smoothing_width = smoothing_width

    def fit(self, X, y=None):
        X = _check_pairs(X)
        self.n_features_in_ = X.shape[1]
        arm_set = make_arms([tuple(r) for r in X])
        cfg = SolverConfig(self.epsilon, self.boundary_policy, self.smoothing_width)
        grid = Grid.for_arms(effective_arms(arm_set, cfg), self.cells, frame=self.frame)
        self.solution_ = solve_hjb(arm_set, _default_utility(self.utility), grid, cfg)
        self.value_ = self.solution_.corner_value
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        P = check_array(X, dtype=float)
        if P.shape[1] != 2:
            raise InvalidInputError("predict expects (x, y) rows")
        return np.asarray(self.solution_.value_at(P[:, 0], P[:, 1]))


class MonteCarloValueEstimator(BaseEstimator):
    """Monte Carlo ``U_n`` of a strategy (default: specialise in arm 0)."""

    def __init__(self, utility=None, strategy=None, horizon=100, paths=10_000, seed=0,
                 antithetic=False, threads=1):
        self.utility = utility
        self.strategy = strategy
        self.horizon = horizon
        self.paths = paths
        self.seed = seed
        self.antithetic = antithetic
        self.threads = threads

    def fit(self, X, y=None):
        X = _check_pairs(X)
        self.n_features_in_ = X.shape[1]
        arm_set = make_arms([tuple(r) for r in X])
        cfg = SimulationConfig(self.horizon, self.paths, self.seed, self.antithetic, self.threads)
        strategy = Specialize(0) if self.strategy is None else self.strategy
        self.estimate_ = estimate_Un(arm_set, strategy, _default_utility(self.utility), cfg)
        self.value_ = self.estimate_.mean
        self.std_error_ = self.estimate_.std_error
        return self


class ExactDPEstimator(BaseEstimator):
    """Exact ``V_n`` with arms realised as symmetric two-point laws."""

    def __init__(self, utility=None, horizon=8):
        self.utility = utility
        self.horizon = horizon

    def fit(self, X, y=None):
        X = _check_pairs(X)
        self.n_features_in_ = X.shape[1]
        arm_set = make_arms([tuple(r) for r in X])
        self.value_, self.first_action_ = exact_value_dp(arm_set, _default_utility(self.utility), self.horizon)
        return self


class ExtremeArmSelector(TransformerMixin, BaseEstimator):
    """Keep only the arms at vertices of the mean-variance hull."""

    def fit(self, X, y=None):
        X = _check_pairs(X)
        self.n_features_in_ = X.shape[1]
        self.n_arms_ = X.shape[0]
        self.extreme_indices_ = np.asarray(extreme_points([tuple(r) for r in X]), dtype=int)
        return self

    def transform(self, X):
        check_is_fitted(self, "extreme_indices_")
        X = _check_pairs(X)
        if X.shape[0] != self.n_arms_:
            raise InvalidInputError(f"fitted on {self.n_arms_} arms, got {X.shape[0]}")
        return X[self.extreme_indices_]
