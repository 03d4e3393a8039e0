"""Error taxonomy shared across the package.

Everything numerical derives from HalflineError so callers can separate
"the math refused" (exit code 1) from "the input was malformed" (exit code 2).
"""

from __future__ import annotations


class HalflineError(Exception):
    """Base class for numerical failures."""


class SingularMatrixError(HalflineError):
    """Elimination met a pivot below the singularity threshold."""


class HermiticityError(HalflineError, ValueError):
    """A matrix that must be Hermitian is not."""


class BoundaryConditionError(ValueError):
    """A boundary matrix pair fails one of its admissibility conditions.

    `kind` is "hermiticity-violation" or "positivity-violation"; `residual`
    is the measured defect of the failed condition.
    """

    def __init__(self, message: str, *, kind: str, residual: float):
        super().__init__(message)
        self.kind = kind
        self.residual = residual


class ResolutionError(HalflineError):
    """A requested quadrature cannot resolve its oscillation on any affordable grid."""


class DivergenceError(HalflineError):
    """An iterative or recursive solve exceeded its a-priori bound."""


class BoundStatesPresentError(HalflineError):
    """A continuous-spectrum-only operation was asked for on a problem with bound states."""


class BlowUpError(HalflineError):
    """The evolved field left the trust region (H1 norm growth guard)."""


class GrowthError(ValueError):
    """A nonlinearity fails its power-growth check."""


class ConfigError(ValueError):
    """A run configuration is malformed or violates a validity guard."""
