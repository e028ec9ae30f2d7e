"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain an operation accepts."""


class NotReadyError(RuntimeError):
    """A decoder was asked for data it cannot produce yet."""


class ConfigError(ValueError):
    """Invalid scenario or configuration file content.

    ``key`` names the offending setting when there is one, so file-level
    diagnostics can point at its line.
    """

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
