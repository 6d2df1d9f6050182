"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class InvrmtError(Exception):
    exit_code = 1


class ConfigError(InvrmtError, ValueError):
    """Invalid configuration; ``field`` names the offending parameter."""

    exit_code = 2

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class InputError(InvrmtError):
    exit_code = 3


class ParseError(InputError, ValueError):
    """Raised in strict mode on the first malformed trade row."""

    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class AnalysisError(InvrmtError, ValueError):
    exit_code = 4


class DegenerateSeriesError(AnalysisError):
    """A series has zero variance and cannot be standardized."""


class AlignmentError(AnalysisError):
    """Two series do not share the same time index."""


class InsufficientDataError(AnalysisError):
    def __init__(self, message, count=None):
        super().__init__(message)
        self.count = count


class ConvergenceError(AnalysisError):
    pass


class UsageError(InvrmtError):
    """Malformed command line."""

    exit_code = 5
