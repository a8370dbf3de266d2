"""Exception types shared across the package."""
from __future__ import annotations


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class DecompositionError(RuntimeError):
    """A spectral shortcut was requested but the eigendecomposition is not
    trustworthy; callers should fall back to iterated matrix products."""


class PopulationCapError(RuntimeError):
    """A simulated generation would exceed the configured population cap.

    Carries the last fully computed state and the generation index at which
    the step was abandoned, so callers can report a truncated trajectory.
    """

    def __init__(self, message: str, *, state=None, t: int | None = None):
        super().__init__(message)
        self.state = state
        self.t = t
