"""Exception hierarchy shared by the compute modules and the CLI."""


class YMLabError(Exception):
    """Base class for all errors raised by ymlab."""


class InvalidInput(YMLabError, ValueError):
    pass


class InvalidDegree(InvalidInput):
    pass


class ConfigurationError(YMLabError):
    """Bad or inconsistent run configuration (CFL bound, missing calibration, ...)."""


class InconsistentState(YMLabError):
    pass


class DivergenceError(YMLabError, ArithmeticError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class IntegratorFailure(DivergenceError):
    """A runtime monitor (energy monotonicity) was violated."""


class NumericError(YMLabError, ArithmeticError):
    pass


class HorizonTooLong(NumericError):
    """Picard iteration failed to contract on the requested horizon."""
