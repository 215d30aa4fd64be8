"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class MultifracError(Exception):
    """Base class for package errors."""


class DomainError(MultifracError, ValueError):
    """An argument lies outside the domain of the operation."""


class SpecError(MultifracError, ValueError):
    """A problem specification violates a modelling hypothesis."""


class NumericError(MultifracError, ArithmeticError):
    """A numerical routine failed (singular system, NaN, ...)."""


class AccuracyError(NumericError):
    """Requested accuracy could not be reached.

    The best available estimate is kept in :attr:`best`.
    """

    def __init__(self, message: str, best=None) -> None:
        super().__init__(message)
        self.best = best


class NonConvergenceError(NumericError):
    """An iteration exceeded its budget; :attr:`history` holds the residuals."""

    def __init__(self, message: str, history=()) -> None:
        super().__init__(message)
        self.history = list(history)


class ContourResolutionError(NumericError):
    """The Laplace contour is too coarse for the requested times."""


class TailError(NumericError):
    """A power-law tail model does not fit the observation."""


class DegenerateOrdersError(MultifracError, ValueError):
    """Two order sets coincide where distinct ones are required."""


class NonIdentificationWarning(UserWarning):
    """The order estimator stopped above its misfit tolerance."""
