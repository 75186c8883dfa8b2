"""Exception hierarchy shared by the package.

The CLI maps these onto exit codes: ``ConfigError`` -> 1, ``DataError`` -> 2,
``NumericalError`` -> 3.
"""


class LnarxError(Exception):
    """Base class for all package errors."""


class ConfigError(LnarxError, ValueError):
    """Bad arguments or configuration values."""


class DataError(LnarxError, ValueError):
    """Input data violates a dataset invariant."""


class SchemaError(DataError):
    """A column named by the schema is missing from the file."""


class ParseError(DataError):
    """A cell could not be parsed as a finite number."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class LabelError(DataError):
    """A label value is not part of the declared class set."""


class InsufficientDataError(DataError):
    """Too few usable samples to train or score."""


class NumericalError(LnarxError, ArithmeticError):
    """An optimisation or factorisation failed."""


class SelectionError(NumericalError):
    """Forward selection could not pick a single term."""
