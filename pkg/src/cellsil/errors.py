"""Exception hierarchy shared by the numerical modules."""


class CellSILError(Exception):
    """Base class for all errors raised by cellsil."""


class NonMonotoneProfile(CellSILError):
    pass


class DegenerateWell(CellSILError):
    pass


class SingularSystem(CellSILError):
    """A tridiagonal elimination hit a zero (or non-finite) pivot."""


class BracketFailure(CellSILError):
    pass


class StalledArc(CellSILError):
    """The shooting slope cannot reach its target: the rhs has a root on the way."""


class SpanExceeded(CellSILError):
    pass


class NonPositiveRhs(CellSILError):
    pass


class DegenerateTangent(CellSILError):
    pass


class AreaLoopDiverged(CellSILError):
    pass
