"""Linearized dynamics of the porous medium equation around the Barenblatt profile.

Closed-form spectrum, a finite-element check of it, weighted elliptic
solvers and an explicit simulator of the confined equation.
"""

from .errors import (
    AmplitudeTooLargeError,
    AssemblyError,
    ConditioningError,
    DomainError,
    FitError,
    IntegrationError,
    NumericalError,
    UnsupportedDimensionError,
)
from .profile import Parameters, RadialField

__all__ = [
    "AmplitudeTooLargeError",
    "AssemblyError",
    "ConditioningError",
    "DomainError",
    "FitError",
    "IntegrationError",
    "NumericalError",
    "Parameters",
    "RadialField",
    "UnsupportedDimensionError",
]
