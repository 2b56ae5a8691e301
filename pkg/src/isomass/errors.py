"""Exception hierarchy for isomass."""

from __future__ import annotations


class IsomassError(Exception):
    """Base class for all library errors."""


class PointInExcisedSet(IsomassError, ValueError):
    pass


class PointAtConformalSingularity(PointInExcisedSet):
    """The conformal factor vanishes or blows up at this point."""


class BallIntersectsExcisedSet(IsomassError, ValueError):
    pass


class SphereIntersectsExcisedSet(IsomassError, ValueError):
    pass


class InvalidRegion(IsomassError, ValueError):
    pass


class ZeroPerimeter(IsomassError, ValueError):
    pass


class ToleranceNotReached(IsomassError, RuntimeError):
    """Adaptive quadrature ran out of subdivisions.

    The best available estimate is attached as ``measure``.
    """

    def __init__(self, message, measure=None):
        super().__init__(message)
        self.measure = measure


class IllConditionedFit(IsomassError, RuntimeError):
    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class OffsetSearchExhausted(IsomassError, RuntimeError):
    def __init__(self, message, deficit=None):
        super().__init__(message)
        self.deficit = deficit


class BudgetExhausted(IsomassError, RuntimeError):
    """Raised with whatever partial result was reached."""

    def __init__(self, message, best=None, partial=None):
        super().__init__(message)
        self.best = best
        self.partial = partial


class ConfigError(IsomassError, ValueError):
    pass
