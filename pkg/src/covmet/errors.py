"""Exception types shared across the library."""


class CovmetError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CovmetError, ValueError):
    """An argument violates a documented precondition.

    Covers mathematical domain errors (negative chi-square input,
    asymmetric matrix, p-value outside [0, 1]) as well as structural
    ones (wrong shape, too few rows, unknown engine kind).
    """


class DataFormatError(CovmetError, ValueError):
    """A data file or in-memory dataset violates the expected format."""


class RoleError(CovmetError, ValueError):
    """Column role assignments are inconsistent with the dataset."""


class DegenerateResidualsError(CovmetError, ArithmeticError):
    """The residual products are numerically constant, so the
    self-normalized test statistic is undefined.

    Raised instead of silently reporting a p-value; this usually means
    a regression interpolated the data exactly (zero residuals) or a
    candidate column carries no variation.  Use a less flexible
    regression, more data, or drop the offending column.
    """
