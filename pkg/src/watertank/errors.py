"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, RegimeError -> 3,
NumericalError -> 4.
"""


class WatertankError(Exception):
    """Base class for all package errors."""


class ConfigError(WatertankError, ValueError):
    """Invalid configuration value or malformed config input."""


class DomainError(WatertankError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class GridMismatchError(WatertankError, ValueError):
    """Two sampled functions do not share a grid."""


class RegimeError(WatertankError, RuntimeError):
    """Parameters violate a regime inequality required by the construction."""


class UncontrollableError(RegimeError):
    """A required moment vanishes; the requested direction cannot be steered."""


class NumericalError(WatertankError, RuntimeError):
    """A solver failed to converge or produced an unusable result."""
