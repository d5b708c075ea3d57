"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid or malformed run configuration (maps to CLI exit code 2)."""
