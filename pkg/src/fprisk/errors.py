"""Exception types shared across the package."""


class FprError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FprError, ValueError):
    """An argument violates an operation's preconditions."""


class InvalidShapeError(InvalidInputError):
    """A polygon is degenerate, self-intersecting or otherwise unusable."""


class PointObstacleError(InvalidInputError):
    """An obstacle is too small for finite-obstacle mode.

    Such obstacles should be handled with :func:`fprisk.risk.point_bound`.
    """


class UnsupportedShapeError(FprError):
    """The Monte-Carlo oracle only handles convex polygons."""


class SchemaError(InvalidInputError):
    """A scenario or path file failed validation."""


class GenerationError(FprError):
    """Path generation or obstacle placement ran out of attempts."""
