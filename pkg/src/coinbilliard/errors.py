"""Exception hierarchy for the coin billiard."""


class CoinError(Exception):
    """Base class for every error raised by this package."""


class EnergyDeficit(CoinError):
    """The energy is too small for a downward velocity at this phase point."""


class CornerAngle(CoinError):
    """The angle sits on a corner theta = n*pi where the boundary normal is undefined."""


class CornerCollision(CoinError):
    """A flight lands within ``corner_tol`` of a corner."""


class TangencyUnresolved(CoinError):
    """The event finder met a grazing contact it cannot certify."""


class BranchCrossing(CoinError):
    """Finite-difference samples straddle a corner and land on different arcs."""


class NoBracket(CoinError):
    """The k-equation has no sign change on its bracket (energy too small)."""


class ImageDisconnected(CoinError):
    """Adaptive refinement of an image polyline did not converge."""


class StripCountMismatch(CoinError):
    """The number of extracted strips differs from six."""

    def __init__(self, n, census=None):
        super().__init__(f"expected 6 strips, found {n}")
        self.n = n
        self.census = census or {}


class GraphMismatch(CoinError):
    """The measured transition graph differs from the expected rules."""

    def __init__(self, diff):
        super().__init__(f"transition graph mismatch: {diff}")
        self.diff = diff


class ResolutionExceeded(CoinError):
    """The search interval collapsed below working precision."""

    def __init__(self, message, prefix=0):
        super().__init__(message)
        self.prefix = prefix


class NotFound(CoinError):
    """Every branch of the realization search was exhausted."""

    def __init__(self, message, prefix=0):
        super().__init__(message)
        self.prefix = prefix


class OffSection(CoinError):
    """The pre-image collision arrives moving upward, so it is not on the downward section."""


class NotInContact(CoinError):
    pass


class SeparatingContact(CoinError):
    pass


class SimultaneousContact(CoinError):
    pass


class StepError(CoinError):
    """A dynamics error raised while iterating, tagged with the collision index."""

    def __init__(self, index, cause):
        super().__init__(f"collision {index}: {cause}")
        self.index = index
        self.cause = cause
