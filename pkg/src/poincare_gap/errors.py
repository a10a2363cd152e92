"""Exception hierarchy shared by all modules."""


class PoincareGapError(Exception):
    """Base class for every error raised by the package."""


class GeometryError(PoincareGapError, ValueError):
    pass


class NonConvex(GeometryError):
    pass


class Degenerate(GeometryError):
    pass


class TooFewVertices(GeometryError):
    pass


class SolverDidNotConverge(PoincareGapError, RuntimeError):
    pass


class WeightError(PoincareGapError, ValueError):
    pass


class OutsideDomain(WeightError):
    pass


class NonPositiveValue(WeightError):
    pass


class WrongConcavityClass(WeightError):
    pass


class InvalidExponent(PoincareGapError, ValueError):
    pass


class BracketFailure(PoincareGapError, RuntimeError):
    pass


class NonIntegrable(PoincareGapError, RuntimeError):
    pass


class DescentStalled(PoincareGapError, RuntimeError):
    pass


class IntervalTooShort(PoincareGapError, ValueError):
    pass


class MeshBudgetExceeded(PoincareGapError, RuntimeError):
    pass


class LinearSolveFailure(PoincareGapError, RuntimeError):
    pass


class NotConverged(PoincareGapError, RuntimeError):
    pass


class ConstraintRootFailure(PoincareGapError, RuntimeError):
    pass
