"""Exception hierarchy shared by all keplerreg modules."""


class KeplerRegError(Exception):
    """Base class for every error raised by this package."""


class StructuralError(KeplerRegError, ValueError):
    """Operands live on incompatible variable sets or shapes."""


class DomainError(KeplerRegError, ValueError):
    """Input lies outside the domain of a map (e.g. the zero spinor)."""


class CollisionError(DomainError):
    """State sits on the collision set, where the physical chart is singular."""


class SingularChartError(DomainError):
    """The denominator ||P|| + P0 of the physical chart vanishes."""


class ConstraintError(DomainError):
    """A constraint (I = 0, -P0 > 0, energy sign) is violated."""


class UnsupportedError(KeplerRegError, NotImplementedError):
    """Requested operation is outside the supported function class."""


class ClosureError(KeplerRegError):
    """A bracket or commutator leaves the span of the given generators.

    Attributes
    ----------
    pair : tuple
        Names (or indices) of the offending generator pair.
    residual : object
        The part of the bracket not captured by the span.
    """

    def __init__(self, message, pair=None, residual=None):
        super().__init__(message)
        self.pair = pair
        self.residual = residual
