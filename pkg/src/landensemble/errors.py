"""Exception types shared across the package.

The CLI maps each family onto a process exit code.
"""


class LandEnsembleError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(LandEnsembleError, ValueError):
    """Invalid configuration, flags, or parameter values."""

    exit_code = 2


class DataError(LandEnsembleError, ValueError):
    """Malformed, inconsistent, or insufficient input data."""

    exit_code = 3


class ConvergenceError(LandEnsembleError, RuntimeError):
    """An optimizer could not produce a usable model."""

    exit_code = 4
