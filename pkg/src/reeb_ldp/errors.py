"""Exception hierarchy for the reeb_ldp package.

Hard failures raise; advisory checks return report objects instead.
"""


class ReebLdpError(Exception):
    """Base class for all package errors."""


class ConfigError(ReebLdpError):
    """Malformed or inconsistent configuration input."""


class DegenerateCritical(ReebLdpError):
    """A critical point with (numerically) singular Hessian was found."""


class NonConvergence(ReebLdpError):
    """An iterative solve failed to converge from every admissible seed."""


class BadKind(ReebLdpError):
    """Operation applied to a critical point of the wrong type."""


class AmbiguousWiring(ReebLdpError):
    """Level-set component census could not be wired into a consistent graph."""


class EqualSaddleLevels(ReebLdpError):
    """Two saddle values (or a saddle and another critical value) coincide."""


class OutsideBox(ReebLdpError):
    """Point lies outside the working box of the system."""


class ContinuityBreak(ReebLdpError):
    """Trajectory projection jumped across non-adjacent graph edges."""


class GridMismatch(ReebLdpError):
    """Two graph paths live on incompatible time grids."""


class GuardBand(ReebLdpError):
    """Requested level is too close to a vertex value to trace reliably."""


class NoClosure(ReebLdpError):
    """Level-curve tracing exhausted its budget without closing the orbit."""


class DegenerateCurve(ReebLdpError):
    """The gradient norm collapsed along a level curve."""


class OutOfSpan(ReebLdpError):
    """Coefficient lookup outside the tabulated edge span."""


class BoxExit(ReebLdpError):
    """Deterministic flow left the working box."""

    def __init__(self, message, time=None, state=None):
        super().__init__(message)
        self.time = time
        self.state = state


class StepTooLarge(ReebLdpError):
    """Simulation step violates the fast-rotation resolution constraint."""


class ChartFail(ReebLdpError):
    """Saddle chart construction could not meet its residual tolerance."""


class OutsideChart(ReebLdpError):
    """Chart coordinates outside the validated chart domain."""


class UncoveredEdge(ReebLdpError):
    """A path visits an edge with no tabulated coefficients."""


class Unreachable(ReebLdpError):
    """No finite-action route exists between the requested endpoints."""

    def __init__(self, message, blocking_vertex=None):
        super().__init__(message)
        self.blocking_vertex = blocking_vertex
