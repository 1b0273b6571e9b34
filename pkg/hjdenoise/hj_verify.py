"""
Numerical checks of the Hamilton-Jacobi structure behind the denoising models.

    S(x, t) = min_v J(x − tv) + t·H*(v)
    F(x, t) = min_v t·D_{H*}(x/t, v) + J*(∇H*(v))

S solves ∂S/∂t + H(∇ₓS) = 0, F solves
∂F/∂t + H(∇H*(x/t)) − H(∇H*(x/t) − ∇ₓF) = 0, and S + F = t·H*(x/t).
The minimizer is recovered as ∇H(∇ₓS) and as ∇H(∇H*(x/t) − ∇ₓF).
S is always computed through the convex model and F through the Bregman
model at the same minimizer. Each is differentiated by central finite
differences over the same cached solver calls, so the F-PDE and the F-based
recovery are checked against F's own values. Derivatives of F obtained from
S through F = t·H*(x/t) − S serve only as a cross-check.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from . import config
from .admm_solvers import AdmmConfig, MeyerBallPrior, Prior, SolveReport, admm_generic
from .convex_core import Hamiltonian, HamiltonianKind, grad_h, grad_h_star, h_eval, h_star_eval, scaled_h_star
from .errors import DomainError, SolverError, VerificationError
from .images import ImageLike, as_image
from .tv_ops import tv_eval

logger = logging.getLogger(__name__)


class QuadraticPrior:
    """J = ½‖·‖², only used as an analytic oracle."""

    def prox(self, b: np.ndarray, lam: float) -> np.ndarray:
        return lam * b / (1.0 + lam)

    def value(self, u: np.ndarray) -> float:
        return 0.5 * float(np.sum(u * u))

    def conjugate(self, p: np.ndarray) -> float:
        return 0.5 * float(np.sum(p * p))

    def distance(self, u: np.ndarray) -> float:
        return 0.0


class HjConfig(BaseModel):
    """Solver settings for HJ checks; derivatives of S amplify solver error by 1/fd_step."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=0.3, gt=0, description="TV weight of the Meyer-ball prior")
    prior: str = Field(default="meyer", pattern="^(meyer|quadratic)$", description="J: Meyer ball or ½‖·‖²")
    fd_step: float = Field(default=config.DEFAULT_FD_STEP, gt=0, description="Central difference step")
    lam: float = Field(default=config.DEFAULT_LAMBDA, gt=0)
    max_iter: int = Field(default=20000, gt=0)
    solver_tol: float = Field(default=1e-12, gt=0, description="ADMM primal and dual tolerance")
    tv_tol: float = Field(default=1e-13, gt=0)
    newton_tol: float = Field(default=1e-13, gt=0)
    identity_tol: float = Field(default=1e-5, gt=0, description="Relative tolerance for S + F = t·H*(x/t)")

    def admm_config(self, t: float) -> AdmmConfig:
        return AdmmConfig(lam=self.lam, t=t, alpha=self.alpha, max_iter=self.max_iter,
                          primal_tol=self.solver_tol, dual_tol=self.solver_tol,
                          newton_tol=self.newton_tol, tv_tol=self.tv_tol, log_every=1000)

    def make_prior(self, pixels: int) -> Prior:
        # a fresh prior per solve keeps results independent of call order
        if self.prior == "quadratic":
            return QuadraticPrior()
        return MeyerBallPrior(self.alpha, self.admm_config(1.0).tv_config(self.alpha, pixels))


class HjSample(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    x: np.ndarray
    t: float = Field(gt=0)
    S: float
    grad_x_S: np.ndarray
    dS_dt: float
    F: float
    grad_x_F: np.ndarray
    dF_dt: float
    pde_residual_S: float
    pde_residual_F: float
    fd_step: float = Field(gt=0)
    v_admm: np.ndarray = Field(description="Minimizer from the solver at (x, t)")
    v_from_S: np.ndarray = Field(description="∇H(∇ₓS)")
    v_from_F: np.ndarray = Field(description="∇H(∇H*(x/t) − ∇ₓF), ∇ₓF differenced from F itself")
    v_from_F_via_S: np.ndarray = Field(description="Same formula with ∇ₓF taken from t·H*(x/t) − S")


class FdStudy(BaseModel):
    steps: List[float]
    residuals: List[float]
    ratios: List[float] = Field(description="residual[k] / residual[k+1]")


class _SEvaluator:
    """Memoized S(x, t) through the convex model."""

    def __init__(self, ham: Hamiltonian, cfg: HjConfig):
        self.ham = ham
        self.cfg = cfg
        self._cache: Dict[Tuple[bytes, float], SolveReport] = {}

    def solve(self, x: np.ndarray, t: float) -> SolveReport:
        key = (x.tobytes(), float(t))
        if key not in self._cache:
            report = admm_generic(x, self.ham, self.cfg.admm_config(t), self.cfg.make_prior(x.size))
            if not report.converged:
                raise SolverError(f"S solve at t={t:g} did not converge in {report.iterations} iterations",
                                  state=report)
            self._cache[key] = report
        return self._cache[key]

    def __call__(self, x: np.ndarray, t: float) -> float:
        return self.solve(x, t).obj_additive

    def f_value(self, x: np.ndarray, t: float) -> float:
        """F(x, t) as the Bregman-model objective at the cached minimizer."""
        value = self.solve(x, t).obj_nonadditive
        if not math.isfinite(value):
            raise DomainError(f"F is not finite at t={t:g}")
        return value


def _f_derivatives_via_s(ham: Hamiltonian, x: np.ndarray, t: float,
                         grad_s: np.ndarray, ds_dt: float) -> Tuple[np.ndarray, float]:
    """∇ₓF and ∂F/∂t from F = t·H*(x/t) − S, the t·H*(x/t) term differentiated exactly."""
    anchor = grad_h_star(ham, x / t)
    h_anchor = h_eval(ham, anchor)
    if h_anchor.is_infinite:
        raise DomainError("H is infinite at ∇H*(x/t)")
    # ∂/∂t of t·H*(x/t) is H*(x/t) − ⟨∇H*(x/t), x/t⟩ = −H(∇H*(x/t))
    return anchor - grad_s, -h_anchor.value - ds_dt


def _th_star(ham: Hamiltonian, t: float, x: np.ndarray) -> float:
    value = scaled_h_star(ham, t, x)
    if value.is_infinite:
        raise DomainError("x/t lies outside dom H*")
    return value.value


def _require_interior(ham: Hamiltonian, x: np.ndarray, t: float, h: float) -> None:
    if t <= h:
        raise DomainError(f"t={t:g} must exceed the finite-difference step {h:g}")
    if ham.kind is not HamiltonianKind.QUADRATIC and np.min(x) - h <= 0.0:
        raise DomainError("x must stay in the interior under finite-difference shifts")


def _central_grad_x(fn, x: np.ndarray, t: float, h: float) -> np.ndarray:
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (fn(up, t) - fn(down, t)) / (2.0 * h)
    return grad


def _central_dt(fn, x: np.ndarray, t: float, h: float) -> float:
    return (fn(x, t + h) - fn(x, t - h)) / (2.0 * h)


def _s_residual(ham: Hamiltonian, ds_dt: float, grad_s: np.ndarray) -> float:
    hv = h_eval(ham, grad_s)
    return math.inf if hv.is_infinite else abs(ds_dt + hv.value)


def _f_residual(ham: Hamiltonian, x: np.ndarray, t: float, df_dt: float, grad_f: np.ndarray) -> float:
    anchor = grad_h_star(ham, x / t)
    h_anchor, h_shift = h_eval(ham, anchor), h_eval(ham, anchor - grad_f)
    if h_anchor.is_infinite or h_shift.is_infinite:
        return math.inf
    return abs(df_dt + h_anchor.value - h_shift.value)


def eval_S(x: ImageLike, t: float, ham: Hamiltonian, cfg: HjConfig) -> float:
    """S(x, t) as the converged objective of the convex model."""
    return _SEvaluator(ham, cfg)(as_image(x), t)


def eval_F(x: ImageLike, t: float, ham: Hamiltonian, cfg: HjConfig) -> float:
    """F(x, t) at the recovered minimizer, cross-checked against t·H*(x/t) − S."""
    x = as_image(x)
    if not np.all(np.isfinite(grad_h_star(ham, x / t))):
        raise DomainError("x/t must lie in int dom H*")
    report = _SEvaluator(ham, cfg).solve(x, t)
    direct = report.obj_nonadditive
    through_identity = _th_star(ham, t, x) - report.obj_additive
    scale = 1.0 + abs(_th_star(ham, t, x))
    if abs(direct - through_identity) > cfg.identity_tol * scale:
        raise VerificationError(
            f"F mismatch: direct {direct:.12g} vs t·H*(x/t) − S = {through_identity:.12g}"
        )
    return direct


def moreau_identity_check(x: ImageLike, t: float, ham: Hamiltonian, cfg: HjConfig) -> float:
    """|S + F − t·H*(x/t)| with F evaluated directly at the minimizer."""
    x = as_image(x)
    report = _SEvaluator(ham, cfg).solve(x, t)
    return abs(report.obj_additive + report.obj_nonadditive - _th_star(ham, t, x))


def sample_hj(x: ImageLike, t: float, ham: Hamiltonian, cfg: HjConfig,
              fd_step: Optional[float] = None) -> HjSample:
    x = as_image(x)
    h = fd_step or cfg.fd_step
    _require_interior(ham, x, t, h)
    s_eval = _SEvaluator(ham, cfg)

    report = s_eval.solve(x, t)
    grad_s = _central_grad_x(s_eval, x, t, h)
    ds_dt = _central_dt(s_eval, x, t, h)
    # the shifted solves are cached, so F costs no further solver calls
    grad_f = _central_grad_x(s_eval.f_value, x, t, h)
    df_dt = _central_dt(s_eval.f_value, x, t, h)
    grad_f_via_s, _ = _f_derivatives_via_s(ham, x, t, grad_s, ds_dt)

    anchor = grad_h_star(ham, x / t)
    return HjSample(
        x=x, t=t, S=report.obj_additive, grad_x_S=grad_s, dS_dt=ds_dt,
        F=report.obj_nonadditive, grad_x_F=grad_f, dF_dt=df_dt,
        pde_residual_S=_s_residual(ham, ds_dt, grad_s),
        pde_residual_F=_f_residual(ham, x, t, df_dt, grad_f),
        fd_step=h, v_admm=report.v_bar,
        v_from_S=grad_h(ham, grad_s), v_from_F=grad_h(ham, anchor - grad_f),
        v_from_F_via_S=grad_h(ham, anchor - grad_f_via_s),
    )


def recover_minimizer_from_S(x: ImageLike, t: float, ham: Hamiltonian, cfg: HjConfig) -> np.ndarray:
    x = as_image(x)
    s_eval = _SEvaluator(ham, cfg)
    _require_interior(ham, x, t, cfg.fd_step)
    return grad_h(ham, _central_grad_x(s_eval, x, t, cfg.fd_step))


def recover_minimizer_from_F(x: ImageLike, t: float, ham: Hamiltonian, cfg: HjConfig) -> np.ndarray:
    sample = sample_hj(x, t, ham, cfg)
    return sample.v_from_F


def pde_residual_S(x: ImageLike, t: float, ham: Hamiltonian, cfg: HjConfig,
                   fd_step: Optional[float] = None) -> float:
    """|∂S/∂t + H(∇ₓS)| by central differences."""
    x = as_image(x)
    h = fd_step or cfg.fd_step
    _require_interior(ham, x, t, h)
    s_eval = _SEvaluator(ham, cfg)
    return _s_residual(ham, _central_dt(s_eval, x, t, h), _central_grad_x(s_eval, x, t, h))


def pde_residual_F(x: ImageLike, t: float, ham: Hamiltonian, cfg: HjConfig,
                   fd_step: Optional[float] = None) -> float:
    """|∂F/∂t + H(∇H*(x/t)) − H(∇H*(x/t) − ∇ₓF)|; F-based recovery must match the solver."""
    sample = sample_hj(x, t, ham, cfg, fd_step)
    gap = float(np.max(np.abs(sample.v_from_F - sample.v_admm)))
    if gap > 1e-2:
        raise VerificationError(f"F-based minimizer recovery is off by {gap:.3e}")
    return sample.pde_residual_F


def specialized_f_pde_residual(ham: Hamiltonian, x: ImageLike, t: float,
                               df_dt: float, grad_f: ImageLike) -> float:
    """
    The F-PDE in the forms specific to each noise model:

        poisson_exp   ∂F/∂t − (1/t)·Σ xᵢ(exp(−∂F/∂xᵢ) − 1)
        burg_neglog   ∂F/∂t + Σ log(1 + (xᵢ/t)·∂F/∂xᵢ)
    """
    x, grad_f = as_image(x), as_image(grad_f)
    if ham.kind is HamiltonianKind.POISSON_EXP:
        return abs(df_dt - float(np.sum(x * (np.exp(-grad_f) - 1.0))) / t)
    if ham.kind is HamiltonianKind.BURG_NEGLOG:
        inner = 1.0 + (x / t) * grad_f
        if np.any(inner <= 0):
            return math.inf
        return abs(df_dt + float(np.sum(np.log(inner))))
    return _f_residual(ham, x, t, df_dt, grad_f)


def fd_convergence_study(x: ImageLike, t: float, ham: Hamiltonian, cfg: HjConfig,
                         steps: Sequence[float] = (1e-2, 5e-3, 2.5e-3)) -> FdStudy:
    """S-PDE residual over successively halved steps; second order gives ratios near 4."""
    x = as_image(x)
    s_eval = _SEvaluator(ham, cfg)
    residuals = []
    for h in steps:
        _require_interior(ham, x, t, h)
        residuals.append(_s_residual(ham, _central_dt(s_eval, x, t, h), _central_grad_x(s_eval, x, t, h)))
        logger.debug("fd step %.3e residual %.3e", h, residuals[-1])
    ratios = [a / b if b > 0 else math.inf for a, b in zip(residuals, residuals[1:])]
    return FdStudy(steps=list(steps), residuals=residuals, ratios=ratios)


def s_midpoint_convexity_gap(z1: Tuple[ImageLike, float], z2: Tuple[ImageLike, float],
                             ham: Hamiltonian, cfg: HjConfig) -> float:
    """S(midpoint) − mean of S at the endpoints; nonpositive up to solver error."""
    (x1, t1), (x2, t2) = z1, z2
    x1, x2 = as_image(x1), as_image(x2)
    s_eval = _SEvaluator(ham, cfg)
    mid = s_eval(0.5 * (x1 + x2), 0.5 * (t1 + t2))
    return mid - 0.5 * (s_eval(x1, t1) + s_eval(x2, t2))


def duality_check(x: ImageLike, t: float, ham: Hamiltonian, v_bar: ImageLike, alpha: float) -> Tuple[float, float]:
    """
    With ū = x − t·v̄ and p̄ = ∇H*(v̄), return ‖x − ū − t∇H(p̄)‖ and
    |⟨p̄, ū⟩ − α·TV(p̄)|; the second vanishes when ū ∈ ∂(α·TV)(p̄).
    """
    x, v_bar = as_image(x), as_image(v_bar)
    u_bar = x - t * v_bar
    p_bar = grad_h_star(ham, v_bar)
    recovery = float(np.linalg.norm(x - u_bar - t * grad_h(ham, p_bar)))
    support = abs(float(np.sum(p_bar * u_bar)) - alpha * tv_eval(p_bar))
    return recovery, support


def asymptotic_check(v0: ImageLike, d: ImageLike, t_schedule: Sequence[float],
                     ham: Hamiltonian, cfg: HjConfig) -> List[float]:
    """‖v̄(t_k) − v0‖ for data x = t_k·v0 + d."""
    v0, d = as_image(v0), as_image(d)
    if list(t_schedule) != sorted(t_schedule) or min(t_schedule) <= 0:
        raise DomainError("t_schedule must be increasing and positive")
    if not np.all(np.isfinite(grad_h_star(ham, v0))):
        raise DomainError("v0 must lie in int dom H*")
    s_eval = _SEvaluator(ham, cfg)
    errors = []
    for t in t_schedule:
        report = s_eval.solve(t * v0 + d, t)
        errors.append(float(np.linalg.norm(report.v_bar - v0)))
        logger.info("asymptotic t=%g error=%.3e", t, errors[-1])
    return errors


def asymptotic_limit_of_s_over_t(v0: ImageLike, d: ImageLike, t_schedule: Sequence[float],
                                 ham: Hamiltonian, cfg: HjConfig) -> List[float]:
    """|S(t·v0 + d, t)/t − H*(v0)| along the schedule."""
    v0, d = as_image(v0), as_image(d)
    limit = h_star_eval(ham, v0)
    if limit.is_infinite:
        raise DomainError("v0 must lie in dom H*")
    s_eval = _SEvaluator(ham, cfg)
    return [abs(s_eval(t * v0 + d, t) / t - limit.value) for t in t_schedule]
