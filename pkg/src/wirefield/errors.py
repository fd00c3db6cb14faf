"""Exception hierarchy.

Validation problems derive from :class:`ValidationError`; failures of a
numerical procedure derive from :class:`NumericalError`. The CLI maps the
two families to different exit codes.
"""


class WirefieldError(Exception):
    """Base class for all package errors."""


class ValidationError(WirefieldError, ValueError):
    pass


class NumericalError(WirefieldError, ArithmeticError):
    pass


class InvalidProfileError(ValidationError):
    pass


class UnsupportedOrderError(ValidationError):
    pass


class WireSingularityError(ValidationError):
    """Raised for evaluations at or inside the wire (r <= 0)."""


class InvalidTripletError(ValidationError):
    pass


class QuadratureBudgetError(NumericalError):
    """Requested accuracy not reached; ``estimate`` and ``error`` hold the best attempt."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class PotentialRangeError(NumericalError):
    """Radius outside the interval covered by a potential interpolant."""


class CollisionError(NumericalError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class IntegrationError(NumericalError):
    pass


class SingularJacobianError(NumericalError):
    def __init__(self, message, sigma_min=None):
        super().__init__(message)
        self.sigma_min = sigma_min


class ConvergenceError(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoBranchError(NumericalError):
    pass
