"""Exception hierarchy shared across the package."""


class YamabeLabError(Exception):
    """Base class for all package errors."""


class InvalidConfig(YamabeLabError):
    """Malformed or out-of-range configuration."""


class InvalidDimension(InvalidConfig):
    """Manifold dimension below 3 is not supported."""


class OutOfDomain(YamabeLabError):
    """A radius or coordinate falls outside the grid extent."""


class InvalidExponent(YamabeLabError):
    """An integrability or weight exponent violates its admissible range."""


class MissingDerivatives(YamabeLabError):
    """Finite differencing failed for a requested derivative order."""


class NonPositiveFactor(YamabeLabError):
    """A conformal factor must be strictly positive."""


class BadDecay(YamabeLabError):
    """Radial conformal factor does not approach 1 at the outer boundary."""


class BadDelta(YamabeLabError):
    """Weight parameter delta must lie strictly above the critical value."""


class UnknownName(YamabeLabError):
    """Unknown catalog entry."""


class NoConvergence(YamabeLabError):
    """Iterative solver exhausted its iteration budget."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PreconditionViolated(YamabeLabError):
    """A documented operation precondition does not hold for the inputs."""


class LostPositivity(YamabeLabError):
    """An iterate that must stay positive touched zero (discretization failure)."""


class NotYamabePositive(YamabeLabError):
    """Region failed the required Yamabe-positivity precheck."""


class PositivityLoss(YamabeLabError):
    """Continuation step lost positivity and retries were exhausted."""


class StallNoDescent(YamabeLabError):
    """Line search could not produce a descent step."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class InconsistentOutcome(YamabeLabError):
    """Solve status contradicts the zero-set sign verdict.

    The solvability theorem ties the two together; a violation signals a
    discretization failure or an under-resolved run, never a valid result.
    """
