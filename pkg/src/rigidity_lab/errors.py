"""Exception types shared across the package."""


class RigidityLabError(Exception):
    """Base class for all package errors."""


class ConfigError(RigidityLabError):
    """Scenario configuration could not be parsed or validated."""


class NonPositiveMediumError(RigidityLabError):
    """A refraction coefficient is not strictly positive on the domain."""


class OutOfClassError(RigidityLabError):
    """A field or boundary profile is not smooth enough for the solvers."""


class TrappedRayError(RigidityLabError):
    """A geodesic exceeded the path-length cap without reaching the boundary."""


class TangentExitError(RigidityLabError):
    """A geodesic reached the boundary with a nearly tangent direction."""


class GridMismatchError(RigidityLabError):
    """Two boundary tables were built on different grids."""


class GridTooCoarseError(RigidityLabError):
    """Derivative grids drift too much under refinement to be trusted."""


class IdentityViolationError(RigidityLabError):
    """A finite-difference travel-time gradient failed its consistency check."""


class OutOfRangeError(RigidityLabError):
    """A recovered quantity fell outside its admissible range."""


class DivergedError(RigidityLabError):
    """An iterative solve increased its residual twice in a row."""


class RankDeficientError(RigidityLabError):
    """A normal system is singular beyond the regularization level."""
