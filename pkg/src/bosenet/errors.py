"""Exception types raised across the package."""


class BosenetError(Exception):
    """Base class for all package errors."""


class ValidationError(BosenetError, ValueError):
    """An input violates a documented precondition or invariant."""


class UnsupportedConfigurationError(BosenetError):
    """The requested configuration has no defined treatment."""


class IntegrationError(BosenetError, RuntimeError):
    """Time stepping became unstable or failed to reach its accuracy target."""


class ConfigError(BosenetError):
    """A scenario or drive configuration file is malformed."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class DiagnosticError(BosenetError):
    """A numerical cross-check produced data that fails its own sanity test."""
