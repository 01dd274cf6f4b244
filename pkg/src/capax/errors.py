"""Exception taxonomy. Every failure mode raised by the library lives here."""


class CapaxError(Exception):
    """Base class for all library errors."""


class MixedBackend(CapaxError):
    """Arithmetic attempted between scalars of incompatible backends."""


class BackendOverflow(CapaxError):
    """Exact recursion exceeded the configured depth/denominator safety bound."""


class NonConvex(CapaxError):
    """Region fails the convexity (or convex-function) requirement."""


class NotInQuadrant(CapaxError):
    """Region leaves the closed positive quadrant."""


class AxisContactMissing(CapaxError):
    """Boundary does not meet the axes in segments [0,a] x {0} and {0} x [0,b]."""


class EmptyDomain(CapaxError):
    """Degenerate region (a point, a segment, or zero area)."""


class ResolutionTooSmall(CapaxError):
    """polygonalize needs at least 2 boundary samples."""


class TruncationTooCoarse(CapaxError):
    """Dropped weight tail exceeds the requested certificate tolerance."""


class TailNotDecreasing(CapaxError):
    """truncation_schedule given a tail function that increases."""


class NonPositiveHead(CapaxError):
    """Initial polarisation size must be positive."""


class NotNef(CapaxError):
    """A divisor pairs negatively with a boundary curve."""

    def __init__(self, message, curve=None, value=None):
        super().__init__(message)
        self.curve = curve
        self.value = value


class UnknownNode(CapaxError):
    """Blowup centre is not a current boundary node."""


class UnpairableTails(CapaxError):
    """Both tower divisors have nonzero constant tails; the pairing diverges."""


class DimensionMismatch(CapaxError):
    """Class vector length does not match the surface's Picard rank."""


class SearchSpaceEmpty(CapaxError):
    """Capacity enumeration on a non-big polarisation."""


class CeilingExceeded(CapaxError):
    """Enumeration hit its configured search ceiling."""


class BelowThreshold(CapaxError):
    """c_plus evaluated below its validity threshold in k."""


class NoStabilization(CapaxError):
    """Tower capacity did not certify stability within the level ceiling."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class PruningBoundExceeded(CapaxError):
    """Decomposition infimum scan hit its ceiling before certifying."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class WindowOutOfRange(CapaxError):
    """Requested window extends past the computed series."""


class VolumeMismatch(CapaxError):
    """Series volume and tower A^2/2 disagree beyond reported slack."""


class NotComparable(CapaxError):
    """Obstruction check between domains whose backends cannot be reconciled."""
