"""
Anisotropic total variation and its proximal map.

    TV(u) = Σ_{i,j} |u[i+1,j] − u[i,j]| + Σ_{i,j} |u[i,j+1] − u[i,j]|

with differences taken only between existing neighbours. The proximal
map argmin_z α·TV(z) + ½‖z − b‖² is computed on the dual side: z = b − Dᵀp
with the edge field p projected onto [−α, α] after each gradient step.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .config import DEFAULT_TV_MAX_ITER, DEFAULT_TV_STEP, DEFAULT_TV_TOL
from .errors import ConvergenceError, DimensionError
from .images import ImageLike, as_image

logger = logging.getLogger(__name__)


class TvProxConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0, description="Regularization weight α")
    max_iter: int = Field(default=DEFAULT_TV_MAX_ITER, gt=0, description="Dual iteration cap")
    dual_tol: float = Field(default=DEFAULT_TV_TOL, gt=0, description="Duality gap and iterate change tolerance")
    step: float = Field(default=DEFAULT_TV_STEP, gt=0, le=0.25, description="Dual gradient step")
    accelerated: bool = Field(default=True, description="Beck-Teboulle momentum on the dual iteration")


class EdgeField(BaseModel):
    """Dual variable: one value per vertical edge and per horizontal edge."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    vertical: np.ndarray
    horizontal: np.ndarray

    @classmethod
    def zeros(cls, shape: Tuple[int, int]) -> "EdgeField":
        rows, cols = shape
        return cls(vertical=np.zeros((rows - 1, cols)), horizontal=np.zeros((rows, cols - 1)))

    def fits(self, shape: Tuple[int, int]) -> bool:
        rows, cols = shape
        return self.vertical.shape == (rows - 1, cols) and self.horizontal.shape == (rows, cols - 1)


class TvProxResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    z: np.ndarray = Field(description="Approximate proximal point")
    dual: EdgeField = Field(description="Final dual edge field, reusable as a warm start")
    iterations: int
    gap: float = Field(description="Achieved duality gap α·TV(z) − ⟨Dz, p⟩")
    change: float = Field(description="Last sup-norm change of z")
    converged: bool


def _gradient(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return u[1:, :] - u[:-1, :], u[:, 1:] - u[:, :-1]


def _divergence_adjoint(pv: np.ndarray, ph: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Dᵀp, the adjoint of the forward-difference operator."""
    out = np.zeros(shape)
    out[:-1, :] -= pv
    out[1:, :] += pv
    out[:, :-1] -= ph
    out[:, 1:] += ph
    return out


def tv_eval(u: ImageLike) -> float:
    u = as_image(u)
    dv, dh = _gradient(u)
    return float(np.sum(np.abs(dv)) + np.sum(np.abs(dh)))


def _duality_gap(z: np.ndarray, pv: np.ndarray, ph: np.ndarray, alpha: float) -> float:
    dv, dh = _gradient(z)
    gap = alpha * (np.sum(np.abs(dv)) + np.sum(np.abs(dh))) - (np.sum(dv * pv) + np.sum(dh * ph))
    return max(float(gap), 0.0)


def tv_prox_solve(b: ImageLike, cfg: TvProxConfig, dual0: Optional[EdgeField] = None) -> TvProxResult:
    """Dual projected-gradient prox of α·TV; never raises on non-convergence."""
    b = as_image(b)
    shape = b.shape
    alpha = cfg.alpha

    if shape == (1, 1):
        return TvProxResult(z=b.copy(), dual=EdgeField.zeros(shape), iterations=0,
                            gap=0.0, change=0.0, converged=True)

    if dual0 is not None and dual0.fits(shape):
        pv = np.clip(dual0.vertical, -alpha, alpha)
        ph = np.clip(dual0.horizontal, -alpha, alpha)
    else:
        pv, ph = np.zeros((shape[0] - 1, shape[1])), np.zeros((shape[0], shape[1] - 1))

    tau = cfg.step / 2.0 if cfg.accelerated else cfg.step
    qv, qh = pv.copy(), ph.copy()
    momentum = 1.0

    z = b - _divergence_adjoint(pv, ph, shape)
    dual_obj = 0.5 * float(np.sum(z * z))
    best = (np.inf, z, pv, ph)
    gap, change = np.inf, np.inf

    for it in range(1, cfg.max_iter + 1):
        zq = b - _divergence_adjoint(qv, qh, shape)
        gv, gh = _gradient(zq)
        pv_new = np.clip(qv + tau * gv, -alpha, alpha)
        ph_new = np.clip(qh + tau * gh, -alpha, alpha)

        z_new = b - _divergence_adjoint(pv_new, ph_new, shape)
        new_obj = 0.5 * float(np.sum(z_new * z_new))

        if cfg.accelerated:
            if new_obj > dual_obj:
                # restart the momentum when the dual objective goes up
                momentum = 1.0
                qv, qh = pv_new.copy(), ph_new.copy()
            else:
                next_momentum = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum * momentum))
                beta = (momentum - 1.0) / next_momentum
                qv = pv_new + beta * (pv_new - pv)
                qh = ph_new + beta * (ph_new - ph)
                momentum = next_momentum
        else:
            qv, qh = pv_new, ph_new

        change = float(np.max(np.abs(z_new - z)))
        pv, ph, z, dual_obj = pv_new, ph_new, z_new, new_obj
        gap = _duality_gap(z, pv, ph, alpha)
        if gap < best[0]:
            best = (gap, z, pv, ph)

        if gap <= cfg.dual_tol and change <= cfg.dual_tol:
            logger.debug("TV prox converged in %d iterations (gap %.3e)", it, gap)
            return TvProxResult(z=z, dual=EdgeField(vertical=pv, horizontal=ph), iterations=it,
                                gap=gap, change=change, converged=True)

    best_gap, z, pv, ph = best
    logger.warning("TV prox stopped at max_iter=%d with gap %.3e", cfg.max_iter, best_gap)
    return TvProxResult(z=z, dual=EdgeField(vertical=pv, horizontal=ph), iterations=cfg.max_iter,
                        gap=best_gap, change=change, converged=False)


def tv_prox(b: ImageLike, cfg: TvProxConfig) -> np.ndarray:
    """argmin_z α·TV(z) + ½‖z − b‖²; raises ConvergenceError with the best iterate."""
    result = tv_prox_solve(b, cfg)
    if not result.converged:
        raise ConvergenceError(
            f"TV prox did not reach dual_tol={cfg.dual_tol:g} in {cfg.max_iter} iterations",
            best=result.z, residual=result.gap, state=result,
        )
    return result.z


def _condat_1d(y: np.ndarray, lam: float) -> np.ndarray:
    """Direct taut-string algorithm for 1D TV denoising (Condat, 2013)."""
    n = y.size
    x = np.empty(n)
    k = k0 = kplus = kminus = 0
    umin, umax = lam, -lam
    vmin, vmax = y[0] - lam, y[0] + lam
    twolam = 2.0 * lam

    while True:
        while k == n - 1:
            if umin < 0.0:
                x[k0:kminus + 1] = vmin
                k0 = kminus + 1
                kminus = k = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                x[k0:kplus + 1] = vmax
                k0 = kplus + 1
                kplus = k = k0
                vmax = y[k0]
                umax = -lam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                x[k0:k + 1] = vmin
                return x

        umin += y[k + 1] - vmin
        if umin < -lam:
            x[k0:kminus + 1] = vmin
            k0 = kminus + 1
            kplus = kminus = k = k0
            vmin = y[k0]
            vmax = vmin + twolam
            umin, umax = lam, -lam
            continue

        umax += y[k + 1] - vmax
        if umax > lam:
            x[k0:kplus + 1] = vmax
            k0 = kplus + 1
            kplus = kminus = k = k0
            vmax = y[k0]
            vmin = vmax - twolam
            umin, umax = lam, -lam
            continue

        k += 1
        if umin >= lam:
            kminus = k
            vmin += (umin - lam) / (kminus - k0 + 1)
            umin = lam
        if umax <= -lam:
            kplus = k
            vmax += (umax + lam) / (kplus - k0 + 1)
            umax = -lam


def tv_prox_1d_exact(b: ImageLike, alpha: float) -> np.ndarray:
    """Exact prox of α·TV on a single-row image."""
    b = as_image(b)
    if b.shape[0] != 1:
        raise DimensionError(f"exact 1D prox needs a single-row image, got shape {b.shape}")
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    return _condat_1d(b[0], float(alpha)).reshape(1, -1)
