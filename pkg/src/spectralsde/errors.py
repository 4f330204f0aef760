"""Exception types shared across the package."""


class SpectralSdeError(Exception):
    """Base class for package errors."""


class EigenConvergenceError(SpectralSdeError):
    """Eigensolver failed to converge; carries the relative residual."""

    def __init__(self, residual, sweeps):
        self.residual = residual
        self.sweeps = sweeps
        super().__init__(
            f"Jacobi sweeps did not converge after {sweeps} sweeps, "
            f"relative off-diagonal residual {residual:.3e}")


class DegenerateMatrixError(SpectralSdeError):
    """Input too far from orthogonal (or singular) for polar projection."""


class OrderingError(SpectralSdeError):
    """Eigenvalues not strictly ascending where the operation requires it."""


class PreconditionError(SpectralSdeError):
    """An operation precondition was violated."""


class SimulationError(SpectralSdeError):
    """A simulation aborted (solver failure, invalid configuration)."""
