"""Exception hierarchy.

Every error raised on bad input data derives from :class:`DataError`, which
the command line maps to exit status 1.
"""


class ShockPanelError(Exception):
    """Base class for all package errors."""


class DataError(ShockPanelError, ValueError):
    """Input data violates a documented precondition."""


# panel
class DuplicateKey(DataError):
    pass


class GapInPanel(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class UnknownSeries(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


# smoother / shocks
class TooFewObservations(DataError):
    pass


class SingularLocalFit(DataError):
    pass


class AlignmentError(DataError):
    pass


class DegenerateDenominator(DataError, ZeroDivisionError):
    pass


# regress
class CollinearDesign(DataError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class TooFewClusters(DataError):
    pass


class UnknownCoefficient(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class SingularRestriction(DataError):
    pass


# lasso
class NotConverged(ShockPanelError, RuntimeError):
    """Coordinate descent hit ``max_sweeps``; ``solution`` holds the last iterate."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


# report
class ReportSchemaError(DataError):
    pass
