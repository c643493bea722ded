"""Exception hierarchy shared across the toolkit.

The CLI maps these to exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


class ConfigError(ValueError):
    """Invalid run configuration or config file."""


class DataError(ValueError):
    """Malformed, degenerate or otherwise unusable input data."""


class NumericalError(RuntimeError):
    """A numerical procedure diverged or failed to converge."""


class CorruptModelError(DataError):
    """A model file failed its format, version or checksum validation."""
