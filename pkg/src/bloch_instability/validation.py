"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

import numpy as np

from .bloch import SampledFunction, SpatialGrid
from .errors import ConfigurationError, ShapeError
from .operators import PeriodicOperator


def check_grid(periods, points_per_period) -> SpatialGrid:
    return SpatialGrid(int(periods), int(points_per_period))


def check_operator(op) -> PeriodicOperator:
    if not isinstance(op, PeriodicOperator):
        raise ConfigurationError(f"expected a PeriodicOperator, got {type(op).__name__}")
    return op


def check_samples(X, grid: SpatialGrid, components=1):
    """Coerce ``X`` to a complex array of shape ``(n_samples, components * n_points)``.

    Accepts a :class:`SampledFunction`, a single row, or a 2-D stack of rows.
    """
    if isinstance(X, SampledFunction):
        if X.grid != grid:
            raise ShapeError(f"function lives on {X.grid}, estimator expects {grid}")
        X = X.values.reshape(1, -1)
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    width = components * grid.n_points
    if X.ndim != 2 or X.shape[1] != width:
        raise ShapeError(f"expected samples of shape (n_samples, {width}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ShapeError("samples contain NaN or infinity")
    return X.astype(complex)


def as_functions(X, grid, components=1):
    rows = check_samples(X, grid, components)
    return [SampledFunction(grid, row.reshape(components, -1)) for row in rows]


def stack_functions(funcs):
    return np.array([f.values.reshape(-1) for f in funcs])
