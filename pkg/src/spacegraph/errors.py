"""Exception types shared across the package."""


class SpacegraphError(Exception):
    """Base class for all package-specific errors."""


class ChartDomainError(SpacegraphError):
    """A chart point lies outside the chart's domain of validity."""


class DegeneratePlaneError(SpacegraphError):
    """Plane vectors are (numerically) parallel; no 2-plane is spanned."""


class InjectivityRadiusError(SpacegraphError):
    """Requested geodesic step exceeds the injectivity radius guard."""


class NotSpacelikeError(SpacegraphError):
    """A graph node violates the spacelike condition (some singular value >= 1)."""


class PoleRowError(SpacegraphError):
    """Node sits on a singular pole row of a latitude-longitude grid."""


class SpacelikeViolation(SpacegraphError):
    """Time step rejected repeatedly; evolving graph left the spacelike regime."""

    def __init__(self, message, telemetry=None):
        super().__init__(message)
        self.telemetry = telemetry or {}


class NonConvergence(SpacegraphError):
    """Flow hit t_max without reaching the requested tolerances."""


class NonUniformSamplingError(SpacegraphError):
    """Residual evaluation requires uniformly spaced records."""


class InsufficientDecayError(SpacegraphError):
    """Trajectory did not decay enough to fit a rate."""


class HypothesisError(SpacegraphError):
    """Model pair or initial map violates a theorem hypothesis."""


class ConfigError(SpacegraphError):
    """Malformed configuration input."""

    def __init__(self, message, line=None, key=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if key is not None:
            loc.append(f"key '{key}'")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.key = key
