"""
ADMM solvers for the denoising models.

The additive model min_v J(x − tv) + t·H*(v) is split with w = x − tv:

    v ← argmin_v t·H*(v) + λ/2‖w + tv − x + y‖²
    w ← argmin_w J(w) + λ/2‖w + tv − x + y‖²
    y ← y + w + tv − x

With J = (α·TV)* the w-step is a projection onto the Meyer ball of radius
α, obtained as b − prox_{αTV}(b). poisson-logtv and mult-invtv are this
scheme with the poisson_exp and burg_neglog Hamiltonians; poisson-tv and
mult-logtv are the classical models, split as v = w.
"""

import logging
import math
from enum import Enum
from typing import List, Optional, Protocol, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import xlogy

from . import config
from .convex_core import (
    Hamiltonian,
    HamiltonianKind,
    bregman_primal,
    grad_h_star,
    h_star_eval,
)
from .errors import DimensionError, InputError, SolverError
from .images import ImageLike, as_image
from .newton import bracketed_newton
from .tv_ops import EdgeField, TvProxConfig, tv_eval, tv_prox_solve

logger = logging.getLogger(__name__)


class ModelName(str, Enum):
    POISSON_LOGTV = "poisson-logtv"
    POISSON_TV = "poisson-tv"
    MULT_INVTV = "mult-invtv"
    MULT_LOGTV = "mult-logtv"


class AdmmConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(default=config.DEFAULT_LAMBDA, gt=0, alias="lambda", description="Penalty λ")
    t: float = Field(gt=0, description="Model parameter t (exposure time or number of looks)")
    alpha: float = Field(gt=0, description="Regularization weight α")
    max_iter: int = Field(default=config.DEFAULT_MAX_ITER, gt=0)
    primal_tol: float = Field(default=config.DEFAULT_PRIMAL_TOL, gt=0, description="Bound on ‖primal residual‖/√n")
    dual_tol: float = Field(default=config.DEFAULT_DUAL_TOL, gt=0, description="Bound on ‖λ(w_k+1 − w_k)‖/√n")
    newton_tol: float = Field(default=config.DEFAULT_NEWTON_TOL, gt=0)
    newton_max_iter: int = Field(default=config.DEFAULT_NEWTON_MAX_ITER, gt=0)
    tv_tol: float = Field(default=config.DEFAULT_TV_TOL, gt=0, description="TV prox tolerance per pixel")
    tv_max_iter: int = Field(default=config.DEFAULT_TV_MAX_ITER, gt=0)
    log_every: int = Field(default=100, gt=0)

    def tv_config(self, weight: float, pixels: int) -> TvProxConfig:
        # the duality gap is a sum over pixels, so its bound grows with n
        return TvProxConfig(alpha=weight, max_iter=self.tv_max_iter,
                            dual_tol=self.tv_tol * max(1, pixels))


class SolveReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: str = Field(description="Model or Hamiltonian that produced the report")
    v_bar: np.ndarray = Field(description="Restored image")
    obj_nonadditive: float = Field(description="Bregman-fidelity objective at v_bar, constants included")
    obj_additive: float = Field(description="Convex-model objective at v_bar; J is taken as finite, "
                                            "so only meaningful when prior_gap is negligible")
    prior_gap: float = Field(default=0.0, ge=0, description="‖u − P(u)‖/√n for u = x − t·v_bar, "
                                                              "P the projection onto dom J")
    iterations: int
    primal_residuals: List[float] = Field(default_factory=list)
    dual_residuals: List[float] = Field(default_factory=list)
    converged: bool = False


class Prior(Protocol):
    """The function J of the additive model, seen through its prox and conjugate."""

    def prox(self, b: np.ndarray, lam: float) -> np.ndarray:
        """argmin_w J(w) + λ/2‖w − b‖²."""

    def value(self, u: np.ndarray) -> float:
        """J(u) at a point produced by `prox`."""

    def conjugate(self, p: np.ndarray) -> float:
        """J*(p)."""

    def distance(self, u: np.ndarray) -> float:
        """Euclidean distance from u to dom J."""


class MeyerBallPrior:
    """J = (α·TV)*, the indicator of the Meyer ball of radius α."""

    def __init__(self, alpha: float, tv_cfg: Optional[TvProxConfig] = None):
        self.alpha = alpha
        self.tv_cfg = tv_cfg or TvProxConfig(alpha=alpha)
        self._dual: Optional[EdgeField] = None
        self.last_gap = 0.0

    def prox(self, b: np.ndarray, lam: float) -> np.ndarray:
        # projection onto the ball, whatever λ is, through b − prox_{αTV}(b)
        result = tv_prox_solve(b, self.tv_cfg, self._dual)
        w = b - result.z
        self._dual = result.dual
        self.last_gap = result.gap
        return w

    def value(self, u: np.ndarray) -> float:
        # prox outputs lie in the ball, where the indicator is zero
        return 0.0

    def conjugate(self, p: np.ndarray) -> float:
        return self.alpha * tv_eval(p)

    def distance(self, u: np.ndarray) -> float:
        # u − P(u) = prox_{αTV}(u); the warm start is read but not replaced
        return float(np.linalg.norm(tv_prox_solve(u, self.tv_cfg, self._dual).z))


# scalar inner solvers ------------------------------------------------------

def poisson_log_newton(rhs: ImageLike, t: float, lam: float, v0: Optional[np.ndarray] = None,
                       tol: float = config.DEFAULT_NEWTON_TOL,
                       max_iter: int = config.DEFAULT_NEWTON_MAX_ITER) -> np.ndarray:
    """Solve t·log v + λt²·v = rhs for v > 0, per pixel."""
    rhs = as_image(rhs)
    c = lam * t
    r = rhs / t
    # in u = log v: φ(u) = u + c·e^u − r, increasing and convex
    lo = np.minimum(r - c, 0.0) - 1.0
    u_guess = np.log(2.0 * np.maximum(r, 1.0) / c)
    hi = np.where(u_guess + c * np.exp(u_guess) - r > 0.0, u_guess, r + 1.0)
    u0 = np.log(v0) if v0 is not None and np.all(v0 > 0) else 0.5 * (lo + hi)

    result = bracketed_newton(
        lambda u: u + c * np.exp(u) - r,
        lambda u: 1.0 + c * np.exp(u),
        u0, lo, hi, tol, max_iter,
    )
    if not result.converged:
        raise SolverError(f"Newton for the poisson-logtv v-update stalled (last step {result.max_step:.3e})",
                          state={"u": result.root, "rhs": rhs})
    return np.exp(result.root)


def mult_log_newton(x: ImageLike, t: float, lam: float, c: ImageLike, u0: Optional[np.ndarray] = None,
                    tol: float = config.DEFAULT_NEWTON_TOL,
                    max_iter: int = config.DEFAULT_NEWTON_MAX_ITER) -> np.ndarray:
    """Solve t + λ(u − c) − x·e^{−u} = 0 per pixel, with c = w − y and x > 0."""
    x, c = as_image(x), as_image(c)
    if np.any(x <= 0):
        raise InputError("mult-logtv inner solve needs x > 0")
    lo = c - t / lam
    hi = np.maximum(c, np.log(x / t)) + 1.0
    start = u0 if u0 is not None else 0.5 * (lo + hi)

    result = bracketed_newton(
        lambda u: t + lam * (u - c) - x * np.exp(-u),
        lambda u: lam + x * np.exp(-u),
        start, lo, hi, tol, max_iter,
    )
    if not result.converged:
        raise SolverError(f"Newton for the mult-logtv u-update stalled (last step {result.max_step:.3e})",
                          state={"u": result.root, "c": c})
    return result.root


def _positive_root(s: np.ndarray, q: np.ndarray) -> np.ndarray:
    """s + √(s² + q) for q ≥ 0, without cancellation when s < 0."""
    root = np.sqrt(s * s + q)
    with np.errstate(divide="ignore", invalid="ignore"):
        negative_branch = np.where(root - s > 0.0, q / (root - s), 0.0)
    return np.where(s >= 0.0, s + root, negative_branch)


def poisson_tv_closed_form(x: ImageLike, t: float, lam: float, c: ImageLike) -> np.ndarray:
    """Minimizer of Σ(tv − x log v) + λ/2‖v − c‖² with c = w − y."""
    x, c = as_image(x), as_image(c)
    s = 0.5 * (c - t / lam)
    return _positive_root(s, x / lam)


def mult_invtv_closed_form(x: ImageLike, t: float, lam: float, c: ImageLike) -> np.ndarray:
    """Minimizer of −t Σ log v + λ/2‖c' + tv − x‖², here c = w + y."""
    x, c = as_image(x), as_image(c)
    s = (x - c) / (2.0 * t)
    return _positive_root(s, np.full_like(s, 1.0 / (lam * t)))


def solve_v_update(ham: Hamiltonian, t: float, lam: float, rhs: np.ndarray,
                   v_prev: Optional[np.ndarray], cfg: AdmmConfig) -> np.ndarray:
    """argmin_v t·H*(v) + λ/2‖tv − rhs‖², rhs = x − w − y."""
    if ham.kind is HamiltonianKind.QUADRATIC:
        return lam * rhs / (1.0 + lam * t)
    if ham.kind is HamiltonianKind.POISSON_EXP:
        return poisson_log_newton(lam * t * rhs, t, lam, v_prev, cfg.newton_tol, cfg.newton_max_iter)
    s = rhs / (2.0 * t)
    return _positive_root(s, np.full_like(s, 1.0 / (lam * t)))


# objectives ---------------------------------------------------------------

def additive_objective(ham: Hamiltonian, x: np.ndarray, t: float, v: np.ndarray, prior: Prior) -> float:
    """J(x − tv) + t·H*(v)."""
    h_star = h_star_eval(ham, v)
    if h_star.is_infinite:
        return math.inf
    return prior.value(x - t * v) + t * h_star.value


def nonadditive_objective(ham: Hamiltonian, x: np.ndarray, t: float, v: np.ndarray, prior: Prior) -> float:
    """t·D_{H*}(x/t, v) + J*(∇H*(v))."""
    return t * bregman_primal(ham, x / t, v) + prior.conjugate(grad_h_star(ham, v))


def kl_fidelity(x: np.ndarray, t: float, v: np.ndarray) -> float:
    """Σ(tv − x log v + x log(x/t) − x) = t·KL(x/t, v)."""
    return float(np.sum(t * v - xlogy(x, v) + xlogy(x, x / t) - x))


def is_fidelity(x: np.ndarray, t: float, v: np.ndarray) -> float:
    """t·Σ(−1 + log v + (x/t)/v − log(x/t)), the Itakura-Saito fidelity."""
    return float(t * np.sum(-1.0 + np.log(v) + (x / t) / v - np.log(x / t)))


# solvers ------------------------------------------------------------------

def check_feasible(ham: Hamiltonian, x: np.ndarray) -> None:
    """x ∈ (dom J + t·int dom H*) ∩ t·dom H* for J a Meyer-ball indicator."""
    if ham.kind is HamiltonianKind.POISSON_EXP:
        if np.any(x < 0):
            raise InputError("Poisson data must be nonnegative")
        if not np.sum(x) > 0:
            raise InputError("Poisson data must have a positive total count")
    elif ham.kind is HamiltonianKind.BURG_NEGLOG:
        if np.any(x <= 0):
            raise InputError("multiplicative-noise data must be strictly positive")


def _residual_norm(r: np.ndarray) -> float:
    return float(np.linalg.norm(r) / math.sqrt(r.size))


def admm_generic(x: ImageLike, ham: Hamiltonian, cfg: AdmmConfig,
                 prior: Optional[Prior] = None) -> SolveReport:
    """ADMM on the additive model J(x − tv) + t·H*(v)."""
    x = as_image(x)
    if x.size != ham.dimension:
        raise DimensionError(f"x has {x.size} pixels, Hamiltonian expects {ham.dimension}")
    check_feasible(ham, x)
    t, lam = cfg.t, cfg.lam
    prior = prior or MeyerBallPrior(cfg.alpha, cfg.tv_config(cfg.alpha, x.size))

    if ham.kind is HamiltonianKind.QUADRATIC:
        v = x / t
    else:
        v = np.maximum(x / t, config.INIT_FLOOR)
    w = x - t * v
    y = np.zeros_like(x)
    primal_hist: List[float] = []
    dual_hist: List[float] = []
    converged = False

    for k in range(1, cfg.max_iter + 1):
        try:
            v = solve_v_update(ham, t, lam, x - w - y, v, cfg)
        except SolverError as exc:
            exc.state = _report(ham.kind.value, ham, x, t, v, prior, k - 1, primal_hist, dual_hist, False)
            raise
        w_new = prior.prox(x - t * v - y, lam)
        residual = w_new + t * v - x
        y = y + residual

        primal_hist.append(_residual_norm(residual))
        dual_hist.append(_residual_norm(lam * (w_new - w)))
        w = w_new

        if k % cfg.log_every == 0:
            logger.debug("admm %s it=%d primal=%.3e dual=%.3e", ham.kind.value, k, primal_hist[-1], dual_hist[-1])
        if primal_hist[-1] < cfg.primal_tol and dual_hist[-1] < cfg.dual_tol:
            converged = True
            break

    _log_outcome(ham.kind.value, converged, len(primal_hist), primal_hist, dual_hist)
    return _report(ham.kind.value, ham, x, t, v, prior, len(primal_hist), primal_hist, dual_hist, converged)


def _report(label: str, ham: Hamiltonian, x: np.ndarray, t: float, v: np.ndarray, prior: Prior,
            iterations: int, primal: List[float], dual: List[float], converged: bool) -> SolveReport:
    try:
        obj_non = nonadditive_objective(ham, x, t, v, prior)
    except Exception:  # domain errors on a broken iterate
        obj_non = math.nan
    u = x - t * v
    gap = prior.distance(u) / math.sqrt(u.size)
    return SolveReport(model=label, v_bar=v.copy(), obj_nonadditive=obj_non,
                       obj_additive=additive_objective(ham, x, t, v, prior),
                       prior_gap=gap if math.isfinite(gap) else math.inf, iterations=iterations,
                       primal_residuals=list(primal), dual_residuals=list(dual), converged=converged)


def _log_outcome(label: str, converged: bool, iterations: int, primal: List[float], dual: List[float]) -> None:
    if converged:
        logger.info("%s converged in %d iterations", label, iterations)
    else:
        logger.warning("%s hit max_iter=%d (primal %.3e, dual %.3e)", label, iterations,
                       primal[-1] if primal else math.nan, dual[-1] if dual else math.nan)


def poisson_logtv_denoise(x: ImageLike, cfg: AdmmConfig) -> SolveReport:
    """min Σ(tv − x log v) + α·TV(log v), solved through its additive twin."""
    x = as_image(x)
    report = admm_generic(x, Hamiltonian.for_image(HamiltonianKind.POISSON_EXP, x), cfg)
    return report.model_copy(update={"model": ModelName.POISSON_LOGTV.value})


def mult_invtv_denoise(x: ImageLike, cfg: AdmmConfig) -> SolveReport:
    """min t·IS(x/t, v) + α·TV(−1/v), solved through its additive twin."""
    x = as_image(x)
    report = admm_generic(x, Hamiltonian.for_image(HamiltonianKind.BURG_NEGLOG, x), cfg)
    return report.model_copy(update={"model": ModelName.MULT_INVTV.value})


def _consensus_admm(label: str, x: np.ndarray, cfg: AdmmConfig, start: np.ndarray,
                    local_step) -> Tuple[np.ndarray, int, List[float], List[float], bool]:
    """ADMM on f(v) + α·TV(w) subject to v = w; `local_step(c, prev)` minimizes f + λ/2‖· − c‖²."""
    lam = cfg.lam
    tv_cfg = cfg.tv_config(cfg.alpha / lam, x.size)
    v, w = start.copy(), start.copy()
    y = np.zeros_like(x)
    dual_field: Optional[EdgeField] = None
    primal_hist: List[float] = []
    dual_hist: List[float] = []
    converged = False

    for k in range(1, cfg.max_iter + 1):
        v = local_step(w - y, v)
        prox = tv_prox_solve(v + y, tv_cfg, dual_field)
        dual_field = prox.dual
        w_new = prox.z
        residual = v - w_new
        y = y + residual

        primal_hist.append(_residual_norm(residual))
        dual_hist.append(_residual_norm(lam * (w_new - w)))
        w = w_new

        if k % cfg.log_every == 0:
            logger.debug("admm %s it=%d primal=%.3e dual=%.3e", label, k, primal_hist[-1], dual_hist[-1])
        if primal_hist[-1] < cfg.primal_tol and dual_hist[-1] < cfg.dual_tol:
            converged = True
            break

    _log_outcome(label, converged, len(primal_hist), primal_hist, dual_hist)
    return v, w, primal_hist, dual_hist, converged


def poisson_tv_denoise(x: ImageLike, cfg: AdmmConfig) -> SolveReport:
    """min Σ(tv − x log v) + α·TV(v)."""
    x = as_image(x)
    if np.any(x < 0):
        raise InputError("Poisson data must be nonnegative")
    t, lam = cfg.t, cfg.lam
    start = np.maximum(x / t, config.INIT_FLOOR)

    v, _, primal, dual, converged = _consensus_admm(
        ModelName.POISSON_TV.value, x, cfg, start,
        lambda c, _prev: poisson_tv_closed_form(x, t, lam, c),
    )
    # zero-count regions may drive v to the boundary of (0, ∞)
    v = np.maximum(v, config.INIT_FLOOR)
    objective = kl_fidelity(x, t, v) + cfg.alpha * tv_eval(v)
    return SolveReport(model=ModelName.POISSON_TV.value, v_bar=v, obj_nonadditive=objective,
                       obj_additive=objective, iterations=len(primal), primal_residuals=primal,
                       dual_residuals=dual, converged=converged)


def mult_logtv_denoise(x: ImageLike, cfg: AdmmConfig) -> SolveReport:
    """min t·IS(x/t, v) + α·TV(log v), solved in w = log v."""
    x = as_image(x)
    if np.any(x <= 0):
        raise InputError("multiplicative-noise data must be strictly positive")
    t, lam = cfg.t, cfg.lam
    start = np.log(np.maximum(x / t, config.INIT_FLOOR))

    def local_step(c: np.ndarray, prev: np.ndarray) -> np.ndarray:
        return mult_log_newton(x, t, lam, c, prev, cfg.newton_tol, cfg.newton_max_iter)

    _, w, primal, dual, converged = _consensus_admm(ModelName.MULT_LOGTV.value, x, cfg, start, local_step)
    v = np.exp(w)
    return SolveReport(
        model=ModelName.MULT_LOGTV.value, v_bar=v,
        obj_nonadditive=is_fidelity(x, t, v) + cfg.alpha * tv_eval(w),
        obj_additive=float(np.sum(t * w + x * np.exp(-w))) + cfg.alpha * tv_eval(w),
        iterations=len(primal), primal_residuals=primal, dual_residuals=dual, converged=converged,
    )


_SOLVERS = {
    ModelName.POISSON_LOGTV: poisson_logtv_denoise,
    ModelName.POISSON_TV: poisson_tv_denoise,
    ModelName.MULT_INVTV: mult_invtv_denoise,
    ModelName.MULT_LOGTV: mult_logtv_denoise,
}


def denoise(model, x: ImageLike, cfg: AdmmConfig) -> SolveReport:
    return _SOLVERS[ModelName(model)](x, cfg)


def hamiltonian_for_model(model, image: ImageLike) -> Hamiltonian:
    """Hamiltonian whose Bregman distance is the model's data fidelity."""
    model = ModelName(model)
    kind = (HamiltonianKind.POISSON_EXP if model in (ModelName.POISSON_LOGTV, ModelName.POISSON_TV)
            else HamiltonianKind.BURG_NEGLOG)
    return Hamiltonian.for_image(kind, image)
