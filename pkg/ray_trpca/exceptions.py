class TRPCAError(Exception):
    """Base class for all errors raised by ray-trpca."""


class ConfigError(TRPCAError, ValueError):
    """Invalid experiment configuration.

    Args:
        message (str): What is wrong.
        field (Optional[str]): Dotted path of the offending field, e.g.
            ``"radar.bandwidth_hz"``.
    """

    def __init__(self, message: str, field: str = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class NumericalError(TRPCAError, ArithmeticError):
    """A numerical routine failed."""


class SvdConvergenceError(NumericalError):
    """The SVD iteration did not converge."""


class DegenerateInputError(NumericalError):
    """Input for which the requested quantity is undefined."""


class WindowCoverageError(TRPCAError, ValueError):
    """A travel-time difference fell outside the fast-time window."""


class PlanError(TRPCAError, ValueError):
    """Invalid sub-aperture tensor plan."""


class NoTargetDetectedError(TRPCAError):
    """No slow-time row passed the stability threshold."""
