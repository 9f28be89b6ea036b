"""Exception types raised across the toolkit."""


class PatchAsymError(Exception):
    """Base class for all toolkit errors."""


class SeparationViolation(PatchAsymError):
    """A patch comes closer than d_min to the interface set."""


class UnsupportedGeometry(PatchAsymError):
    """No closed form is implemented for the requested boundary."""


class MeshFailure(PatchAsymError):
    """Mesh generation produced a degenerate or invalid triangulation."""


class SingularSystem(PatchAsymError):
    """The essential set is empty, so the stiffness matrix is singular."""


class SolverFailure(PatchAsymError):
    """The sparse factorization or the residual check failed."""


class TruncationTooSmall(PatchAsymError):
    """One-sided truncated capacities differ by more than 20%."""


class QuadratureFailure(PatchAsymError):
    """Adaptive quadrature exceeded its depth limit."""


class SingularEvaluation(PatchAsymError):
    """A kernel was evaluated on its diagonal x = y."""


class IllConditioned(PatchAsymError):
    """The condition estimate of a kernel matrix exceeds 1e12."""


class SourceTooCloseToBoundary(PatchAsymError):
    """The source point of N(x, .) lies within 4h of the boundary."""


class InsufficientData(PatchAsymError):
    """A fit was requested with fewer than three usable rows."""


class ConfigError(PatchAsymError):
    """A sweep configuration is malformed."""


class IoFailure(PatchAsymError):
    """A report file could not be written."""
