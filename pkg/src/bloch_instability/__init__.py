"""Floquet-Bloch spectral analysis and nonlinear instability experiments for periodic operators."""
from .bloch import SampledFunction, SpatialGrid, bloch_transform, inverse_bloch
from .errors import BlochInstabilityError
from .evolution import linear_evolve, nonlinear_evolve
from .growth import instability_experiment, polynomial_bound
from .operators import (Nonlinearity, PeriodicCoefficient, PeriodicOperator, heat_operator,
                        kdvks_operator, mathieu_operator)
from .projections import complement_Pprime, lambda_M, project_P
from .spectra import XiGrid, bloch_spectrum, lambda0, unstable_set

__version__ = "0.1.0"

__all__ = [
    "BlochInstabilityError", "Nonlinearity", "PeriodicCoefficient", "PeriodicOperator",
    "SampledFunction", "SpatialGrid", "XiGrid", "bloch_spectrum", "bloch_transform",
    "complement_Pprime", "heat_operator", "inverse_bloch", "instability_experiment",
    "kdvks_operator", "lambda0", "lambda_M", "linear_evolve", "mathieu_operator",
    "nonlinear_evolve", "polynomial_bound", "project_P", "unstable_set",
]
