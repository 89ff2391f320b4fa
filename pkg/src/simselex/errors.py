"""Exception types shared across the package.

ConfigError maps to CLI exit code 2, NumericalError to exit code 3.
"""


class ConfigError(ValueError):
    """Invalid configuration, arguments, or input files."""


class NumericalError(RuntimeError):
    """A solver or pipeline failed numerically."""
