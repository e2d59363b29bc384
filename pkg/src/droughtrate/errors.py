"""Exception hierarchy.

Validation problems (bad input files, bad parameters) map to CLI exit code 1,
computation problems (zero variance where a ratio needs it, identity check
failures) to exit code 2.
"""


class DroughtRateError(Exception):
    """Base class for all package errors."""


class ValidationError(DroughtRateError, ValueError):
    """Input data or parameters violate a documented precondition."""


class ComputationError(DroughtRateError, ArithmeticError):
    """A quantity is undefined for the given data (e.g. zero variance)."""


class PanelError(ValidationError):
    """Problem found while reading a tabular source.

    ``source``, ``row`` and ``column`` locate the offending cell when known;
    ``row`` counts the header as row 1.
    """

    def __init__(self, message, *, source=None, row=None, column=None):
        self.source = source
        self.row = row
        self.column = column
        where = []
        if source is not None:
            where.append(str(source))
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column '{column}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class MalformedRowError(PanelError):
    pass


class NegativeValueError(PanelError):
    pass


class DuplicateKeyError(PanelError):
    pass


class EmptyPanelError(PanelError):
    pass


class MissingPriceError(ValidationError):
    pass


class ZeroAreaError(ValidationError):
    def __init__(self, year):
        self.year = year
        super().__init__(f"total planted area is zero in year {year}")


class ZeroVarianceError(ComputationError):
    pass


class IdentityCheckError(ComputationError):
    """Two algebraically equal forms of the same statistic disagree."""
