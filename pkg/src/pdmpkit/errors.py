"""Exception types shared across the toolkit."""


class PdmpError(Exception):
    """Base class for all toolkit errors."""


class ContractViolationError(PdmpError):
    """An operation was called outside its stated preconditions."""


class TimeRangeError(PdmpError):
    """A query time falls outside the trajectory's covered range."""


class GradientDegenerateError(PdmpError):
    """A gradient-dependent transition was invoked with a zero gradient."""


class InverseUndefinedError(PdmpError):
    """The angle-to-speed inverse was queried below the map's range."""


class QuadratureError(PdmpError):
    """A numerical integration failed to converge to the requested tolerance."""


class StalledProcessError(PdmpError):
    """Both the proposal and refreshment rates are zero; no next event exists."""


class BoundViolationError(PdmpError):
    """The thinning bound was exceeded too often after burn-in."""


class ConfigError(PdmpError):
    """An experiment or simulation configuration is invalid."""


class StepSizeError(PdmpError):
    """Stochastic gradient descent diverged; the step size is too large."""


class DataError(PdmpError):
    """Input data violates a format or content constraint."""
