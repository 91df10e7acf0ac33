"""Exception types shared across the package."""


class GasFlowError(Exception):
    """Base class for solver failures."""


class VacuumError(GasFlowError, ValueError):
    """A Riemann problem or wave curve ran out of positive density."""


class ConvergenceError(GasFlowError, RuntimeError):
    """An iterative solve did not reach its tolerance."""


class SupersonicError(GasFlowError, ValueError):
    """Data left the subsonic operating region of a boundary or vertex."""


class JunctionError(GasFlowError, RuntimeError):
    """A junction solve failed (non-convergence, singular system, bad ghost)."""


class StepError(GasFlowError, RuntimeError):
    """A time step failed; carries the simulation time and location."""

    def __init__(self, message, time=None, location=None):
        super().__init__(message)
        self.time = time
        self.location = location

    def __str__(self):
        msg = super().__str__()
        ctx = []
        if self.time is not None:
            ctx.append(f"t={self.time:.6g}")
        if self.location is not None:
            ctx.append(str(self.location))
        return f"{msg} ({', '.join(ctx)})" if ctx else msg
