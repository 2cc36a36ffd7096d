"""Exception hierarchy shared across the package.

Precondition violations (bad parameters, inadmissible weights, unsupported
model/weight combinations) map to CLI exit status 2; numerical failures
(quadrature non-convergence, solver breakdown) map to exit status 3.
"""


class WChernoffError(Exception):
    """Base class for all package errors."""


class PreconditionError(WChernoffError, ValueError):
    """Invalid argument or violated operation precondition."""


class OutsideSupportError(PreconditionError):
    """Sample point outside the support of the model."""


class NonIntegrableWeightError(PreconditionError):
    """The weight makes the required integral diverge."""


class UnsupportedCombinationError(PreconditionError):
    """Model/weight (or model pair) combination not supported."""


class StateSpaceOverflowError(PreconditionError):
    """Exact enumeration would exceed the state budget; use Monte Carlo."""


class ConvergenceError(WChernoffError, ArithmeticError):
    """Quadrature or optimisation failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class RateInfiniteError(WChernoffError, ArithmeticError):
    """Legendre supremum is unbounded on the working domain."""
