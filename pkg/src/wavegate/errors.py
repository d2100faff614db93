"""Exception types shared across the package.

Plain argument problems raise :class:`ValueError`. The two subclasses below
let the command line map failures onto distinct exit codes.
"""


class DataError(ValueError):
    """Input data is missing, malformed or insufficient."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


class MaxLevelWarning(UserWarning):
    """Decomposition level exceeds the conservative per-length bound."""
