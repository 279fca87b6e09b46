"""Exceptions shared across the solvers and estimators."""


class SolverError(RuntimeError):
    """A forward-model linear solve failed; carries the failing step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class CflError(RuntimeError):
    """Explicit saturation transport violated its CFL bound or physical range."""


class DivergenceError(RuntimeError):
    """An optimization run failed to decrease its objective within the retry budget."""
