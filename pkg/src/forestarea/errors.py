"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: input errors -> 2, numeric or
degenerate-model errors -> 3, gate failures in strict mode -> 4.
"""


class ForestAreaError(Exception):
    """Base class for all package errors."""


class InputError(ForestAreaError, ValueError):
    """Malformed or inconsistent input data."""


class VarianceUndefinedError(ForestAreaError):
    """A stratum or group has fewer than two plots, so S^2 is undefined."""


class EmptyGroupError(ForestAreaError):
    """A poststratum has mapped area but no sample plots."""


class DegenerateModelError(ForestAreaError):
    """A model cannot be fit, e.g. training data with a single class."""


class NumericError(ForestAreaError, ArithmeticError):
    """A linear system is singular or otherwise numerically unusable."""


class GateError(ForestAreaError):
    """A minimum-observation gate failed and strict mode was requested."""
