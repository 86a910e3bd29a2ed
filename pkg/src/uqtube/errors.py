"""Exception hierarchy shared by the solver, geometry and control layers."""


class UqTubeError(Exception):
    """Base class for all package errors."""


class SolverError(UqTubeError):
    """Numerical failure inside an LP/QP or linear-algebra kernel."""


class SingularMatrix(SolverError):
    pass


class IterationLimit(SolverError):
    pass


class NotPositiveDefinite(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class UnstableClosedLoop(SolverError):
    pass


class DimensionMismatch(UqTubeError, ValueError):
    pass


class DimensionUnsupported(UqTubeError, ValueError):
    pass


class DomainError(UqTubeError, ValueError):
    pass


class EmptyPolytope(UqTubeError, ValueError):
    pass


class StructurallyInfeasible(UqTubeError):
    """Tightening consumes the whole constraint budget (some h_s >= 1)."""


class UnboundedOmega(UqTubeError):
    pass


class SampleOutsideW(UqTubeError):
    """A recovered disturbance is not in the conservative set W."""


class BackupUnavailable(UqTubeError):
    pass


class BackupInfeasible(UqTubeError):
    pass
