"""Exception types shared across the package.

Every failure mode that callers are expected to catch gets its own class
here so the CLI can map them onto stable exit codes.
"""

from __future__ import annotations


class BitePlanError(Exception):
    """Base class for all package-specific errors."""


class InvalidSpecError(BitePlanError, ValueError):
    """A geometric or numeric specification is malformed (bad dimensions,
    unknown food kind, non-positive radii, out-of-range weights)."""


class TopologyError(BitePlanError, ValueError):
    """A mesh fails a structural requirement: out-of-range face indices,
    open boundary edges, inconsistent winding, or non-triangle faces."""


class InvalidPlaneError(BitePlanError, ValueError):
    """A slicing plane has a zero-length normal."""


class InfeasibleGoalError(BitePlanError, RuntimeError):
    """Goal sampling exhausted its budget without a single valid pose.

    Carries the attempt statistics so callers can report them.
    """

    def __init__(self, message: str, attempts: int, accepted: int,
                 elapsed_s: float):
        super().__init__(message)
        self.attempts = attempts
        self.accepted = accepted
        self.elapsed_s = elapsed_s


class InvalidStartError(BitePlanError, ValueError):
    """The planner's start pose is already in collision."""


class NoTrajectoryError(BitePlanError, RuntimeError):
    """No goal could be connected within the iteration budget."""


class InsufficientDataError(BitePlanError, ValueError):
    """Too few samples to solve an estimation problem (calibration needs
    at least three distinct orientations)."""


class ConfigError(BitePlanError, ValueError):
    """A scenario or sweep config failed to parse or validate.

    ``location`` is a human-readable pointer (file, key path, or line)
    when one is available.
    """

    def __init__(self, message: str, location: str | None = None):
        super().__init__(message if location is None
                         else f"{location}: {message}")
        self.location = location
