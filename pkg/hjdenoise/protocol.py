"""
Comparison protocol for denoising models.

Two models of the same noise type are compared at equal residual norm
‖x/t − v̄‖: the second model's α is tuned until its residual norm matches
the first one's within a relative tolerance. A t sweep at fixed α shows t
acting as a regularization parameter.
"""

import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .admm_solvers import AdmmConfig, ModelName, SolveReport, denoise
from .errors import SolverError
from .images import ImageLike, as_image, same_shape

logger = logging.getLogger(__name__)


class ComparisonResult(BaseModel):
    model_a: str
    alpha_a: float
    norm_a: float
    model_b: str
    alpha_b: float
    norm_b: float
    relative_mismatch: float = Field(description="|norm_b − norm_a| / norm_a")


class SweepPoint(BaseModel):
    t: float
    distance: float = Field(description="‖v̄ − x/t‖")
    iterations: int
    converged: bool


def residual_norm(observed: ImageLike, v_bar: ImageLike) -> float:
    observed, v_bar = as_image(observed), as_image(v_bar)
    same_shape(observed, v_bar, "observed image and restoration")
    return float(np.linalg.norm(observed - v_bar))


def _run(model, x: np.ndarray, cfg: AdmmConfig, alpha: float) -> Tuple[SolveReport, float]:
    report = denoise(model, x, cfg.model_copy(update={"alpha": alpha}))
    return report, residual_norm(x / cfg.t, report.v_bar)


def match_residual_norm(x: ImageLike, model, target_norm: float, cfg: AdmmConfig,
                        alpha_lo: float = 1e-3, alpha_hi: float = 10.0, rel_tol: float = 0.02,
                        max_steps: int = 40) -> Tuple[float, SolveReport, float]:
    """Bisect log α until ‖x/t − v̄‖ is within rel_tol of target_norm; returns (α, report, norm)."""
    x = as_image(x)
    if target_norm <= 0:
        raise ValueError(f"target norm must be positive, got {target_norm}")

    _, low_norm = _run(model, x, cfg, alpha_lo)
    _, high_norm = _run(model, x, cfg, alpha_hi)
    if not low_norm <= target_norm <= high_norm:
        raise SolverError(
            f"target residual norm {target_norm:.4g} is outside [{low_norm:.4g}, {high_norm:.4g}] "
            f"for alpha in [{alpha_lo:g}, {alpha_hi:g}]"
        )

    lo, hi = math.log(alpha_lo), math.log(alpha_hi)
    for step in range(max_steps):
        alpha = math.exp(0.5 * (lo + hi))
        report, norm = _run(model, x, cfg, alpha)
        logger.debug("match %s step %d alpha=%.5g norm=%.5g", ModelName(model).value, step, alpha, norm)
        if abs(norm - target_norm) <= rel_tol * target_norm:
            return alpha, report, norm
        if norm < target_norm:
            lo = math.log(alpha)
        else:
            hi = math.log(alpha)
    raise SolverError(f"no alpha matched residual norm {target_norm:.4g} in {max_steps} bisection steps")


def matched_comparison(x: ImageLike, model_a, alpha_a: float, model_b, cfg: AdmmConfig,
                       rel_tol: float = 0.02) -> ComparisonResult:
    x = as_image(x)
    _, norm_a = _run(model_a, x, cfg, alpha_a)
    alpha_b, _, norm_b = match_residual_norm(x, model_b, norm_a, cfg, rel_tol=rel_tol)
    result = ComparisonResult(
        model_a=ModelName(model_a).value, alpha_a=alpha_a, norm_a=norm_a,
        model_b=ModelName(model_b).value, alpha_b=alpha_b, norm_b=norm_b,
        relative_mismatch=abs(norm_b - norm_a) / norm_a,
    )
    logger.info("matched %s (alpha=%g) with %s (alpha=%g) at norm %.4g",
                result.model_a, alpha_a, result.model_b, alpha_b, norm_a)
    return result


def t_sweep(observed: ImageLike, ts: Sequence[float], model, alpha: float, cfg: AdmmConfig) -> List[SweepPoint]:
    """Denoise x = t·observed for each t at fixed α and record ‖v̄ − observed‖."""
    observed = as_image(observed)
    points = []
    for t in ts:
        report = denoise(model, t * observed, cfg.model_copy(update={"t": t, "alpha": alpha}))
        points.append(SweepPoint(t=t, distance=residual_norm(observed, report.v_bar),
                                 iterations=report.iterations, converged=report.converged))
    return points
