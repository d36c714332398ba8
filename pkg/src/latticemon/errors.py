"""Exception types shared across the package."""


class LatticemonError(Exception):
    """Base class for every error raised by latticemon."""


class NotEnabled(LatticemonError):
    pass


class BudgetExceeded(LatticemonError):
    pass


class LengthMismatch(LatticemonError, ValueError):
    pass


class MeetMissing(LatticemonError):
    pass


class ProtocolViolation(LatticemonError):
    pass


class PartialState(LatticemonError):
    pass


class UnknownModel(LatticemonError):
    pass


class UnknownFault(LatticemonError):
    pass


class ParseError(LatticemonError):
    """Malformed input text; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(LatticemonError):
    pass
