"""Exception hierarchy shared by the library and the command line."""

from typing import Any, Optional


class HjDenoiseError(Exception):
    """Base class for every error raised by hjdenoise."""


class DimensionError(HjDenoiseError):
    """An argument does not have the dimension the Hamiltonian expects."""


class DomainError(HjDenoiseError):
    """An argument lies on or outside the domain of a function."""


class InputError(HjDenoiseError):
    """Observed data is infeasible for the requested model."""


class SolverError(HjDenoiseError):
    """An iterative solver failed; `state` holds what it had computed so far."""

    def __init__(self, message: str, state: Optional[Any] = None):
        super().__init__(message)
        self.state = state


class ConvergenceError(SolverError):
    """Iteration cap reached before the stopping test passed."""

    def __init__(self, message: str, best: Optional[Any] = None,
                 residual: float = float("nan"), state: Optional[Any] = None):
        super().__init__(message, state=state)
        self.best = best
        self.residual = residual


class ImageFormatError(HjDenoiseError):
    """Malformed or truncated image file."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class VerificationError(HjDenoiseError):
    """A numerical property check exceeded its tolerance."""
