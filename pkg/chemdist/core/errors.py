"""
Errors - exception hierarchy shared by the library, the CLI and the HTTP surface
"""
from typing import Optional


class ChemdistError(Exception):
    """Base class for every error raised on purpose by chemdist."""

    exit_code = 2
    http_status = 400


class ParameterError(ChemdistError):
    """A model or estimator parameter lies outside its documented range."""


class ConfigError(ChemdistError):
    """An experiment or model configuration is invalid."""

    http_status = 422

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key

    def __str__(self) -> str:
        base = super().__str__()
        return f"{self.key}: {base}" if self.key else base


class UsageError(ChemdistError):
    """An operation was called on inputs it does not accept."""


class BoundaryError(UsageError):
    """An interference ball leaves the padded window; the caller must increase pad."""


class FitError(ChemdistError):
    """Too few usable points for a log-log regression."""


class ContractError(ChemdistError):
    """A local event read something outside its box."""


class ResourceError(ChemdistError):
    """A guard against runaway memory or integer overflow tripped."""

    exit_code = 3
    http_status = 413
