"""Exception types shared across the package."""


class SolverError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(f"{message} (residual={residual:.3g}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class RareEventError(RuntimeError):
    """The selection event is too improbable for the requested computation."""


class DegenerateError(RuntimeError):
    """Importance weights or bootstrap laws collapsed (e.g. all weights zero)."""
