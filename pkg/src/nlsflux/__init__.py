"""Pseudo-spectral simulation and flux diagnostics for the damped, driven cubic NLS on a torus."""

__version__ = "0.1.0"

from . import kernels
from .spectral import (TorusGrid, SpectralField, PhysicalField, LPFilter, PaddedTransform,
                       ShapeError, DomainError, forward_transform, inverse_transform)
from .model import SimParams, ForcingEnsemble, ConfigurationError, build_forcing
from .integrator import Stepper, TrajectoryState, StabilityError, exact_linear_spectrum
from .stats import BatchMeans, StationaryEstimate, EstimationError

__all__ = [
    "kernels", "TorusGrid", "SpectralField", "PhysicalField", "LPFilter", "PaddedTransform",
    "ShapeError", "DomainError", "forward_transform", "inverse_transform",
    "SimParams", "ForcingEnsemble", "ConfigurationError", "build_forcing",
    "Stepper", "TrajectoryState", "StabilityError", "exact_linear_spectrum",
    "BatchMeans", "StationaryEstimate", "EstimationError",
]
