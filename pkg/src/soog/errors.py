"""Exceptions raised by the abstraction pipeline."""


class SoogError(Exception):
    """Base class for every error raised by this package."""
    pass


class DomainError(SoogError):
    """Raised when cards, games or indices fall outside a game's domain."""
    pass


class ComplementarityViolation(SoogError):
    """Raised when two traces cannot be spliced into one history."""
    pass


class PhaseError(SoogError):
    """Raised when an operation is applied in the wrong game phase."""
    pass


class RuleError(SoogError):
    """Raised when an action is illegal under the game's betting rules."""
    pass


class ParameterError(SoogError):
    """Raised when an algorithm parameter is out of range."""
    pass


class ValidationError(SoogError):
    """Raised when a strategy, map or artifact fails validation."""
    pass


class ConfigError(SoogError):
    """Raised when a configuration file or override cannot be applied."""
    pass


class InvariantViolation(SoogError):
    """Raised when an internal invariant or asserted ordering does not hold."""
    pass


class DependencyError(SoogError):
    """Raised when a required upstream artifact or table is missing."""

    def __init__(self, message: str, path: str | None = None):
        super().__init__(message if path is None else f"{message}: {path}")
        self.path = path
