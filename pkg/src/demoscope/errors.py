"""Exception types shared across the package.

Two failure families are distinguished so callers (and the CLI) can map
them to distinct exit codes: problems with the data or configuration,
and problems with the numerics.
"""


class DataError(ValueError):
    """Malformed, inconsistent, or insufficient input data or configuration."""


class NumericError(ArithmeticError):
    """Numerical failure: non-finite likelihoods, degenerate rates, overflow."""
