"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when user-supplied inputs violate a documented precondition."""


class ComputationError(RuntimeError):
    """Raised when a numerical procedure fails (divergence, non-convergence, overflow)."""


class SimulationError(ComputationError):
    """Raised when a simulated state becomes non-finite.

    Attributes
    ----------
    step : int
        Index of the step that produced the non-finite value.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
