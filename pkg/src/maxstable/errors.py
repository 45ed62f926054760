"""Exception types shared across the package."""


class MaxStableError(Exception):
    """Base class for all package-specific errors."""


class DomainError(MaxStableError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ResourceGuardError(MaxStableError, RuntimeError):
    """A computation was refused because it would exceed a resource cap.

    Attributes
    ----------
    estimate : int or None
        Estimated requirement (bytes) that triggered the refusal.
    cap : int or None
        The configured cap (bytes).
    """

    def __init__(self, message, estimate=None, cap=None):
        super().__init__(message)
        self.estimate = estimate
        self.cap = cap


class ModelValidityError(MaxStableError, ValueError):
    """A quantity violated a structural property of a valid exponent measure."""


class InitializationError(MaxStableError, ValueError):
    """An optimizer could not start (e.g. non-finite objective at the start)."""


class ConfigError(MaxStableError, ValueError):
    """A run configuration file failed to parse or validate.

    Carries the offending key and line number when known.
    """

    def __init__(self, message, key=None, line=None):
        if key is not None and line is not None:
            message = f"{message} (key '{key}', line {line})"
        elif key is not None:
            message = f"{message} (key '{key}')"
        elif line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.key = key
        self.line = line
