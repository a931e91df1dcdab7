"""Exception hierarchy shared by every layer of the package."""


class SpdError(Exception):
    """Base class for all errors raised by :mod:`spdradial`."""


class InputError(SpdError, ValueError):
    """Malformed input: wrong shape, non-finite entries, asymmetry."""


class DomainError(SpdError, ValueError):
    """A matrix is outside the domain of the requested function.

    ``eigenvalue`` holds the offending eigenvalue when one is known.
    """

    def __init__(self, message, eigenvalue=None, index=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.index = index


class RangeError(SpdError, OverflowError):
    """A result is not representable in double precision."""


class DegeneracyError(SpdError, ArithmeticError):
    """Rank deficiency detected (e.g. a vanishing Gram-Schmidt pivot)."""


class ConvergenceError(SpdError, RuntimeError):
    """An iterative procedure stopped before meeting its tolerance."""

    def __init__(self, message, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


class OptimizationError(ConvergenceError):
    """The quantile/mean optimizer did not converge; ``estimates`` holds the last losses."""


class ParseError(SpdError, ValueError):
    """A dataset or matrix specification could not be parsed."""

    def __init__(self, message, location=None):
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)
        self.location = location
