"""Spectral and scattering tools for matrix Schrodinger operators on the half line."""

from . import asympt, boundary, cli, config, evolve, jost, linalg, linemap, potential, spectral
from .errors import (
    BlowUpError,
    BoundaryConditionError,
    BoundStatesPresentError,
    ConfigError,
    DivergenceError,
    GrowthError,
    HalflineError,
    HermiticityError,
    ResolutionError,
    SingularMatrixError,
)

__version__ = "0.1.0"

__all__ = [
    "asympt",
    "boundary",
    "cli",
    "config",
    "evolve",
    "jost",
    "linalg",
    "linemap",
    "potential",
    "spectral",
    "BlowUpError",
    "BoundaryConditionError",
    "BoundStatesPresentError",
    "ConfigError",
    "DivergenceError",
    "GrowthError",
    "HalflineError",
    "HermiticityError",
    "ResolutionError",
    "SingularMatrixError",
    "__version__",
]
