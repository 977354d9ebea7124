"""Exception types raised by the response engine."""


class LRDysonError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateGroundState(LRDysonError):
    """Ground state is not simple (gap at or below tolerance)."""


class NonHermitian(LRDysonError):
    pass


class PoleProximity(LRDysonError):
    """Frequency argument sits on (or too close to) a pole."""


class SingularDielectric(LRDysonError):
    """The dielectric operator 1 - chi0(z) F cannot be inverted reliably."""


class ConfigError(LRDysonError):
    """Invalid run configuration. ``line``/``column`` are set for parse errors."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column
