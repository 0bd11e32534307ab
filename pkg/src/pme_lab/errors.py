"""Exception hierarchy shared by all modules.

Validation problems (bad parameters, out-of-domain arguments) derive from
``ValueError``; numerical breakdowns derive from ``ArithmeticError``. The CLI
maps the first family to exit code 1 and the second to exit code 2.
"""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedDimensionError(DomainError):
    """Eigenfunction evaluation requested for a dimension without harmonics."""


class AmplitudeTooLargeError(DomainError):
    """The displacement map ``id + s grad(psi)`` is not monotone on the support."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""


class ConditioningError(NumericalError):
    """A factorization failed (matrix not positive definite or singular)."""


class AssemblyError(NumericalError):
    """Finite-element assembly produced an unusable system."""


class FitError(NumericalError):
    """Too few usable points for a decay-rate regression."""


class IntegrationError(NumericalError):
    """Time integration blew up; ``last_state`` holds the last finite state."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state
