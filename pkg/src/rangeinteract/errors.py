"""Exception hierarchy.

Everything raised on purpose derives from :class:`AnalysisError`.  The CLI maps
:class:`DataError` to exit code 2 and :class:`NumericalError` to exit code 3.
"""


class AnalysisError(Exception):
    pass


class DataError(AnalysisError, ValueError):
    """Input data violates a precondition."""


class NumericalError(AnalysisError, ArithmeticError):
    """A computation could not produce a meaningful number."""


# -- input / validation ------------------------------------------------------

class EmptyInput(DataError):
    pass


class DuplicateTimestamp(DataError):
    def __init__(self, t):
        super().__init__(f"duplicate timestamp {t}")
        self.t = t


class NonFiniteCoordinate(DataError):
    def __init__(self, index):
        super().__init__(f"non-finite value in relocation {index}")
        self.index = index


class UnknownMark(DataError):
    pass


class MissingHeader(DataError):
    pass


class BadRow(DataError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class TooShort(DataError):
    pass


class UnevenSampling(DataError):
    pass


class InvalidParams(DataError):
    pass


class UnsupportedFamily(DataError):
    pass


class InsufficientPoints(DataError):
    def __init__(self, mark, n):
        super().__init__(f"mark {mark!r} has {n} points, need at least 4")
        self.mark = mark


class EmptyComponent(DataError):
    pass


class GridMismatch(DataError):
    pass


class InvalidBandwidth(DataError):
    pass


class UnnormalizedGrid(DataError):
    pass


class DegenerateGeometry(DataError):
    pass


# -- numerical -----------------------------------------------------------------

class NonConvergence(NumericalError):
    pass


class NotConverged(NumericalError):
    pass


class DegenerateVariogram(NumericalError):
    pass


class SingularCovariance(NumericalError):
    pass


class NoEligiblePoints(NumericalError):
    pass


class NoEligibleReference(NumericalError):
    pass


class DivisionDomain(NumericalError):
    pass


class LowPowerWarning(UserWarning):
    """Fewer than 19 simulations: a 5% test cannot reject."""
