"""Elementwise Newton iteration with bisection fallback for increasing functions."""

from typing import Callable

import numpy as np
from pydantic import BaseModel, ConfigDict

ArrayFn = Callable[[np.ndarray], np.ndarray]


class NewtonResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    root: np.ndarray
    iterations: int
    converged: bool
    max_step: float


def bracketed_newton(func: ArrayFn, deriv: ArrayFn, x0: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                     tol: float, max_iter: int) -> NewtonResult:
    """
    Solve func(x) = 0 componentwise, func increasing on each bracket (lo, hi)
    with func(lo) < 0 < func(hi). A Newton step that leaves the current
    bracket is replaced by the bracket midpoint.
    """
    lo = np.array(lo, dtype=np.float64)
    hi = np.array(hi, dtype=np.float64)
    x = np.array(x0, dtype=np.float64)
    start_outside = ~((x > lo) & (x < hi))
    x = np.where(start_outside, 0.5 * (lo + hi), x)

    max_step = np.inf
    for it in range(1, max_iter + 1):
        fx = func(x)
        lo = np.where(fx < 0.0, x, lo)
        hi = np.where(fx > 0.0, x, hi)

        with np.errstate(divide="ignore", invalid="ignore"):
            candidate = x - fx / deriv(x)
        rejected = ~np.isfinite(candidate) | (candidate <= lo) | (candidate >= hi)
        candidate = np.where(fx == 0.0, x, candidate)
        candidate = np.where(rejected & (fx != 0.0), 0.5 * (lo + hi), candidate)

        step = np.abs(candidate - x)
        max_step = float(np.max(step))
        x = candidate
        if np.all(step <= tol * np.maximum(1.0, np.abs(x))):
            return NewtonResult(root=x, iterations=it, converged=True, max_step=max_step)

    return NewtonResult(root=x, iterations=max_iter, converged=False, max_step=max_step)
