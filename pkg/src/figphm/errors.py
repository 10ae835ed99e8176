"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
anything else -> 3.
"""


class FigphmError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(FigphmError):
    """Invalid or inconsistent experiment configuration."""


class DataError(FigphmError):
    """Malformed input data (datasets, embeddings, lexicons, checkpoints)."""
