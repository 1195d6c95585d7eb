"""Exception hierarchy shared by all solver layers."""


class LewisLpError(Exception):
    """Base class for all errors raised by this package."""


class RankDeficient(LewisLpError):
    """A factorization pivot fell below tolerance (degenerate matrix or collapsed scaling)."""


class InvalidTolerance(LewisLpError):
    """A tolerance argument is outside its admissible range."""


class InvalidP(LewisLpError):
    """The Lewis exponent p is outside the range supported by the requested routine."""


class NotConverged(LewisLpError):
    """An iterative routine finished without meeting its residual target."""


class OutOfDomain(LewisLpError):
    """A point left the open domain of a barrier (infeasible iterate)."""


class CenteringDiverged(LewisLpError):
    """Centrality increased past the allowed slack; upstream invariants are broken."""


class IterationCap(LewisLpError):
    """The configured hard iteration cap was exceeded."""


class ParseError(LewisLpError):
    """An input file could not be parsed; message carries line/field context."""


class ValidationError(LewisLpError):
    """Parsed data violates a structural precondition (dimensions, interiority, ...)."""


class RepairFailed(LewisLpError):
    """Integral rounding/repair of a flow LP solution failed; caller should retry."""


class DisconnectedGraph(LewisLpError):
    """The flow instance graph is not connected."""
