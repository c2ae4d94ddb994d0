"""Exception hierarchy shared by all modules.

Validation problems derive from :class:`ValidationError` (a ``ValueError``),
numerical breakdowns from :class:`NumericalError` (a ``RuntimeError``).  The
CLI maps the two families onto distinct exit codes.
"""


class ValidationError(ValueError):
    """Input outside the documented domain of an operation."""


class UnsupportedCombination(ValidationError):
    """No closed form exists for the requested coupling form and parameter."""


class OutOfRange(ValidationError):
    """Evaluation requested beyond the range covered by a solution."""


class InconsistentBogoliubov(ValidationError):
    """Bogoliubov pair violates normalization or the arcosh domain."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to deliver a trustworthy result."""


class IntegrationError(NumericalError):
    """ODE integrator failure; ``tau`` holds the last time reached."""

    def __init__(self, message, tau=None):
        super().__init__(message)
        self.tau = tau


class ConvergenceError(NumericalError):
    """Step halving did not reach the requested tolerance."""


class TruncationLeakage(NumericalError):
    """Population reached the edge of a truncated Fock space."""


class UnboundedVariance(ArithmeticError):
    """Zero Fisher information: no finite Cramer-Rao bound exists."""
