"""Exception hierarchy shared by all wander-lab modules."""


class WanderLabError(Exception):
    """Base class for every error raised by wander-lab."""


class DomainError(WanderLabError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class OutsideCollarError(DomainError):
    """A cusp coordinate lies beyond the standard length-2 horocycle."""


class DegenerateError(WanderLabError):
    """The origin is a critical point where a nonzero derivative is required."""


class NonConvergentError(WanderLabError):
    """An iterative procedure ran out of budget before meeting its tolerance."""


class HypothesisError(WanderLabError):
    """A theorem's hypothesis is not met by the supplied data."""


class ScenarioError(WanderLabError):
    """A scenario document failed to parse or validate."""
