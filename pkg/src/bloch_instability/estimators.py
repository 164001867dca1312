"""scikit-learn style wrappers: rows of ``X`` are samples of functions on the box."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .bloch import BlochField, bloch_transform, inverse_bloch
from .evolution import BlochPropagator, linear_evolve
from .projections import lambda_M, project_P
from .spectra import XiGrid, bloch_spectrum, lambda0, unstable_set
from .validation import as_functions, check_grid, check_operator, check_samples, stack_functions


class BlochTransformer(TransformerMixin, BaseEstimator):
    """Flattened Bloch samples ``(n_samples, N_per * N_x)`` per scalar function."""

    def __init__(self, periods=8, points_per_period=64):
        self.periods = periods
        self.points_per_period = points_per_period

    def fit(self, X=None, y=None):
        self.grid_ = check_grid(self.periods, self.points_per_period)
        if X is not None:
            check_samples(X, self.grid_)
        return self

    def transform(self, X):
        check_is_fitted(self, "grid_")
        return np.array([bloch_transform(f).values.reshape(-1) for f in as_functions(X, self.grid_)])

    def inverse_transform(self, X):
        check_is_fitted(self, "grid_")
        X = check_samples(X, self.grid_)
        shape = (1, self.grid_.periods, self.grid_.points_per_period)
        return stack_functions(inverse_bloch(BlochField(self.grid_, row.reshape(shape))) for row in X)


class BlochSpectrum(BaseEstimator):
    """Bloch eigenvalues of ``operator`` on a uniform grid of ``n_xi`` exponents."""

    def __init__(self, operator=None, truncation=16, n_xi=32, p=2.0, jobs=1):
        self.operator = operator
        self.truncation = truncation
        self.n_xi = n_xi
        self.p = p
        self.jobs = jobs

    def fit(self, X=None, y=None):
        op = check_operator(self.operator)
        self.sampling_ = bloch_spectrum(op, XiGrid.uniform(self.n_xi), self.truncation, self.jobs)
        self.eigenvalues_ = self.sampling_.eigenvalues
        self.branches_ = self.sampling_.branches if self.n_xi >= 16 else []
        self.lambda0_ = lambda0(self.sampling_).value
        self.unstable_set_ = unstable_set(self.sampling_, self.p) if self.n_xi >= 16 else None
        return self

    def predict(self, xi):
        """Top eigenvalue (largest real part) at the nearest sampled ``xi``."""
        check_is_fitted(self, "sampling_")
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        idx = np.rint((xi + 0.5) * self.n_xi).astype(int) % self.n_xi
        return self.eigenvalues_[idx, 0]


class SpectralProjector(TransformerMixin, BaseEstimator):
    """Learns ``lambda_M`` of one perturbation; ``transform`` applies the projection ``P``."""

    def __init__(self, operator=None, periods=32, points_per_period=32, truncation=15,
                 tau_act=None, p=2.0):
        self.operator = operator
        self.periods = periods
        self.points_per_period = points_per_period
        self.truncation = truncation
        self.tau_act = tau_act
        self.p = p

    def fit(self, X, y=None):
        op = check_operator(self.operator)
        self.grid_ = check_grid(self.periods, self.points_per_period)
        (u0,) = as_functions(X, self.grid_, op.components)
        self.sampling_ = bloch_spectrum(op, XiGrid.for_grid(self.grid_), self.truncation)
        self.report_ = lambda_M(u0, self.sampling_, self.tau_act, self.p)
        self.lambda_m_ = self.report_.lambda_m
        self.activated_ = self.report_.activated
        return self

    def transform(self, X):
        check_is_fitted(self, "report_")
        funcs = as_functions(X, self.grid_, self.operator.components)
        return stack_functions(project_P(f, self.report_) for f in funcs)

    def predict(self, X):
        """``lambda_M`` of each row under the fitted spectrum."""
        check_is_fitted(self, "sampling_")
        funcs = as_functions(X, self.grid_, self.operator.components)
        return np.array([lambda_M(f, self.sampling_, self.tau_act, self.p).lambda_m for f in funcs])


class LinearSemigroup(TransformerMixin, BaseEstimator):
    """``transform`` maps each row ``u0`` to ``e^{Lt} u0``."""

    def __init__(self, operator=None, t=1.0, periods=8, points_per_period=64, truncation=None):
        self.operator = operator
        self.t = t
        self.periods = periods
        self.points_per_period = points_per_period
        self.truncation = truncation

    def fit(self, X=None, y=None):
        op = check_operator(self.operator)
        self.grid_ = check_grid(self.periods, self.points_per_period)
        self.propagator_ = BlochPropagator(op, self.grid_, self.truncation)
        return self

    def transform(self, X):
        check_is_fitted(self, "propagator_")
        funcs = as_functions(X, self.grid_, self.operator.components)
        return stack_functions(linear_evolve(self.operator, f, self.t, propagator=self.propagator_)
                               for f in funcs)
