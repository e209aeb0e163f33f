"""Exception types shared across the planner."""


class RaceplanError(Exception):
    """Base class for all library errors."""


class SingularFlatness(RaceplanError):
    """Flat-output sample is at (or too close to) a free-fall or gimbal-lock
    configuration, where the flatness maps are undefined."""


class DimensionMismatch(RaceplanError):
    """Inputs have inconsistent shapes for the requested operation."""


class SingularSystem(RaceplanError):
    """The spline linear system could not be factorized."""


class OutOfDomain(RaceplanError):
    """Evaluation time lies outside the trajectory's domain."""


class EmptyAfterShrink(RaceplanError):
    """Applying the safety margin consumed the gate entirely."""


class ParseError(RaceplanError):
    """Track file could not be read or is not structurally valid."""


class ValidationError(RaceplanError):
    """Track file is structurally valid but violates a semantic invariant."""
