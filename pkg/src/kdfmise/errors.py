"""Exception types raised by kdfmise."""


class KdfmiseError(Exception):
    """Base class for all package errors."""


class DomainError(KdfmiseError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class PrecisionError(KdfmiseError, ArithmeticError):
    """Double precision can no longer deliver a trustworthy value."""


class AccuracyError(KdfmiseError, ArithmeticError):
    """A numerical procedure stopped before reaching the requested tolerance.

    The best available estimate is kept on ``self.estimate``.
    """

    def __init__(self, message, estimate=None, abs_error=None):
        super().__init__(message)
        self.estimate = estimate
        self.abs_error = abs_error


class FitError(KdfmiseError, RuntimeError):
    """EM could not produce a usable normal mixture fit."""


class SummaryError(KdfmiseError, RuntimeError):
    """No usable simulation records were left to summarise."""
