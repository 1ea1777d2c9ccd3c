"""Exception hierarchy shared by every module."""


class DSA2Error(Exception):
    """Base class for library errors."""


class ParameterError(DSA2Error, ValueError):
    """An argument is outside its documented domain."""


class PreconditionError(DSA2Error, ValueError):
    """An input violates an operation's precondition (e.g. a disconnected graph)."""


class ConfigurationError(DSA2Error, ValueError):
    """Invalid configuration: unsupported prox pairing or a bad config file.

    ``key`` names the offending config key when there is one; ``line`` and
    ``column`` locate TOML parse errors.
    """

    def __init__(self, message, key=None, line=None, column=None):
        super().__init__(message)
        self.key = key
        self.line = line
        self.column = column


class NumericalError(DSA2Error, ArithmeticError):
    """An iterative routine failed to converge."""


class InfeasibleError(DSA2Error):
    """A coupled problem instance has no feasible point."""
