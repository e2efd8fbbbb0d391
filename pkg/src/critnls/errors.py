"""Exception hierarchy shared by the solver modules and the command line."""


class CritNLSError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(CritNLSError, ValueError):
    """A parameter is outside its admissible domain.

    ``field`` names the offending configuration entry.
    """

    exit_code = 1

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class UsageError(CritNLSError, ValueError):
    exit_code = 1


class DomainError(UsageError):
    """The requested coupling lies outside the regime where the operation is defined."""


class NumericalError(CritNLSError, RuntimeError):
    exit_code = 2

    def __init__(self, message, state=None):
        self.state = state
        super().__init__(message)


class NonConvergenceError(NumericalError):
    """Iteration cap reached; ``state`` carries the last iterate."""


class VerificationError(CritNLSError):
    exit_code = 3

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)
