"""Exception types shared across the package."""


class MCFLabError(Exception):
    """Base class for all mcflab errors."""


class DegenerateNeighborhood(MCFLabError):
    """Quadric fit is rank deficient or has too few neighbors."""


class EmptyInterface(MCFLabError):
    """Level-set field has no zero crossing."""


class Extinct(MCFLabError):
    """Closed-form solution queried at or past its extinction time."""

    def __init__(self, message, extinction_time=None):
        super().__init__(message)
        self.extinction_time = extinction_time


class IntegrationFailure(MCFLabError):
    """Profile ODE integration did not converge."""


class CFLViolation(MCFLabError):
    """Requested time step exceeds the stability bound."""


class GradientBlowup(MCFLabError):
    """Graph solution left the graphical regime."""


class NoTemporalOverlap(MCFLabError):
    """Two flow records share no common time interval."""


class NoCorrespondence(MCFLabError):
    """Points cannot be tracked between consecutive snapshots."""


class SupportEscape(MCFLabError):
    """Surface reached the boundary of a test function's support box."""


class TimeOrder(MCFLabError):
    """Backwards heat kernel evaluated at t >= t0."""


class TimeNotCovered(MCFLabError):
    """Record does not contain (and cannot interpolate to) the requested time."""


class ScaleOrder(MCFLabError):
    """Density scale r must be smaller than the cutoff scale rho."""


class CoverageError(MCFLabError):
    """Record does not cover the space-time region required by an analysis."""


class OpenSurface(MCFLabError):
    """Operation requires a closed mesh."""


class NotMeanConvex(MCFLabError):
    """Surface has a vertex with H <= 0."""

    def __init__(self, message, vertex_index=None, time=None):
        super().__init__(message)
        self.vertex_index = vertex_index
        self.time = time


class NotGraphical(MCFLabError):
    """Surface is not a single-valued graph over the reference cylinder."""

    def __init__(self, message, bad_fraction=None):
        super().__init__(message)
        self.bad_fraction = bad_fraction


class WindowTooShort(MCFLabError):
    """Mode series spans too little renormalized time."""


class NotUnstableDominant(MCFLabError):
    """Fine-neck fit requires an unstable-dominant mode series."""


class ConfigError(MCFLabError):
    """Scenario configuration is invalid."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path:
            loc = f" at {path}"
            if line is not None:
                loc += f" (line {line})"
        super().__init__(message + loc)
        self.path = path
        self.line = line
