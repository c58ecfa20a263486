"""
Custom exceptions for the COLMA memory engine.
"""

from typing import Optional, Dict, Any


class ColmaException(Exception):
    """Base exception for all memory engine errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class StorageException(ColmaException):
    """Raised when a storage operation fails."""
    pass


class IntegrityException(StorageException):
    """Raised when on-disk data fails checksum or format verification."""
    pass


class StoreClosedException(StorageException):
    """Raised when an operation is attempted on a closed store."""
    pass


class CellTooLargeException(StorageException):
    """Raised when a cell value exceeds the configured maximum size."""
    pass


class ValidationException(ColmaException):
    """Raised when input validation fails."""
    pass


class DimensionMismatchException(ValidationException):
    """Raised when a vector does not match the namespace dimension."""
    pass


class RuleException(ValidationException):
    """Raised when a reasoning rule is malformed or unsafe."""
    pass


class ConfigurationException(ColmaException):
    """Raised when configuration is invalid or missing."""
    pass


class NotFoundException(ColmaException):
    """Raised when a referenced record or entity does not exist."""
    pass


class VersionConflictException(ColmaException):
    """Raised when an update carries a stale expected version."""

    def __init__(self, message: str, current_version: int, **kwargs):
        super().__init__(message, **kwargs)
        self.current_version = current_version


class CapabilityDisabledException(ColmaException):
    """Raised when an operation needs a layer disabled by configuration."""
    pass


class SecurityException(ColmaException):
    """Raised when a security violation occurs."""
    pass


class AuthenticationException(SecurityException):
    """Raised when authentication fails."""
    pass


class AuthorizationException(SecurityException):
    """Raised when authorization fails."""
    pass


class ProtocolException(ColmaException):
    """Raised when a wire request cannot be interpreted."""

    def __init__(self, message: str, code: str = "bad_request", **kwargs):
        super().__init__(message, **kwargs)
        self.code = code


class ScenarioException(ColmaException):
    """Raised when a scenario script cannot run."""
    pass


class DirtyNamespaceException(ScenarioException):
    """Raised when a scenario is started in a namespace that already holds data."""
    pass


class ScenarioAssertionError(ScenarioException):
    """Raised when a scenario's final check does not hold."""
    pass
