"""Exception types raised by the factorization routines."""


class BreakdownError(ArithmeticError):
    """A pivot's residual diagonal fell below the breakdown tolerance.

    ``step`` is the number of steps completed before the failure; drivers
    attach their partial ``records`` (and ``state``) before re-raising.
    """

    def __init__(self, message, step=None, records=None, state=None):
        super().__init__(message)
        self.step = step
        self.records = [] if records is None else records
        self.state = state


class NumericalError(ArithmeticError):
    """Non-finite kernel values or a residual diagonal that went too negative.

    Like :class:`BreakdownError`, drivers attach the partial ``records``.
    """

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = [] if records is None else records


class ResourceLimitError(RuntimeError):
    """A candidate grid would exceed the configured point cap."""

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = [] if records is None else records


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""
