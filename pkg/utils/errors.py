"""Exception hierarchy shared by the services and the command-line front end.

Each exception class carries the process exit code that ``main.py`` returns
when the error escapes a subcommand.
"""


class FermiLabError(Exception):
    """Base class for every error raised by the library."""

    exit_code = 1


class DomainError(FermiLabError, ValueError):
    """Input lies outside the domain where a construction is defined."""

    exit_code = 2


class DimensionMismatchError(DomainError):
    """Stencils, fields or matrices with incompatible shapes were combined."""


class SpectralProximityError(DomainError):
    """The energy lies inside the spectrum or too close to a band edge."""


class HypothesisViolationError(DomainError):
    """A structural hypothesis of a construction does not hold."""


class EmbeddingError(DomainError):
    """An eigenpair could not be certified as embedded in the continuum."""


class DegenerateDefectError(DomainError):
    """The synthesized defect would be singular or trivial."""


class PropagatingBranchError(DomainError):
    """No exponentially decaying Floquet multiplier exists at this energy."""


class PoleError(DomainError):
    """A rational expression was evaluated on its denominator zero set."""


class SingularSystemError(DomainError):
    """A truncated linear system could not be solved."""


class DecayFitError(DomainError):
    """Not enough usable shells to fit an exponential decay rate."""


class UnknownCaseError(DomainError):
    """A suite configuration names a case kind that is not registered."""


class ConvergenceError(FermiLabError, ArithmeticError):
    """A numerical procedure did not reach the requested accuracy."""

    exit_code = 3


class QuadratureError(ConvergenceError):
    """Doubling the quadrature grid changed the result too much."""


class RootNotFoundError(ConvergenceError):
    """No admissible bracket was found for a transcendental equation."""
