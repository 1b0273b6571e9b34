"""
Legendre pairs (H, H*) and Bregman distances for the three supported
Hamiltonians:

    quadratic     H(p) = ½‖p‖²                 H*(y) = ½‖y‖²
    poisson_exp   H(p) = Σ exp(p_i)            H*(y) = Σ (y_i log y_i − y_i),  y ≥ 0
    burg_neglog   H(p) = Σ (−1 − log(−p_i)),   H*(y) = −Σ log y_i,             y > 0
                  p < 0

D_{H*} is the Kullback-Leibler distance for poisson_exp and the
Itakura-Saito distance for burg_neglog. 0·log 0 is taken as 0.
"""

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import xlogy

from .config import EPS_DOM
from .errors import DimensionError, DomainError
from .images import ExtendedReal, ImageLike, as_image, same_shape


class HamiltonianKind(str, Enum):
    QUADRATIC = "quadratic"
    POISSON_EXP = "poisson_exp"
    BURG_NEGLOG = "burg_neglog"


class Hamiltonian(BaseModel):
    """A Legendre function H on R^n together with its conjugate H*."""

    model_config = ConfigDict(frozen=True)

    kind: HamiltonianKind = Field(description="quadratic|poisson_exp|burg_neglog")
    dimension: int = Field(gt=0, description="Number of pixels n")

    @classmethod
    def for_image(cls, kind, image: ImageLike) -> "Hamiltonian":
        return cls(kind=kind, dimension=as_image(image).size)


def _checked(ham: Hamiltonian, arr: ImageLike) -> np.ndarray:
    img = as_image(arr)
    if img.size != ham.dimension:
        raise DimensionError(
            f"{ham.kind.value} Hamiltonian has dimension {ham.dimension}, got {img.size} values"
        )
    return img


def in_dom_h(ham: Hamiltonian, p: ImageLike) -> bool:
    p = _checked(ham, p)
    if ham.kind is HamiltonianKind.BURG_NEGLOG:
        return bool(np.all(p < 0.0))
    return True


def in_int_dom_h(ham: Hamiltonian, p: ImageLike) -> bool:
    p = _checked(ham, p)
    if ham.kind is HamiltonianKind.BURG_NEGLOG:
        return bool(np.all(p < -EPS_DOM))
    return True


def in_dom_h_star(ham: Hamiltonian, y: ImageLike) -> bool:
    y = _checked(ham, y)
    if ham.kind is HamiltonianKind.POISSON_EXP:
        return bool(np.all(y >= 0.0))
    if ham.kind is HamiltonianKind.BURG_NEGLOG:
        return bool(np.all(y > 0.0))
    return True


def in_int_dom_h_star(ham: Hamiltonian, y: ImageLike) -> bool:
    y = _checked(ham, y)
    if ham.kind is HamiltonianKind.QUADRATIC:
        return True
    return bool(np.all(y > EPS_DOM))


def h_eval(ham: Hamiltonian, p: ImageLike) -> ExtendedReal:
    p = _checked(ham, p)
    if ham.kind is HamiltonianKind.QUADRATIC:
        return ExtendedReal.finite(0.5 * float(np.sum(p * p)))
    if ham.kind is HamiltonianKind.POISSON_EXP:
        value = float(np.sum(np.exp(p)))
        return ExtendedReal.infinity() if not np.isfinite(value) else ExtendedReal.finite(value)
    if not in_dom_h(ham, p):
        return ExtendedReal.infinity()
    return ExtendedReal.finite(float(np.sum(-1.0 - np.log(-p))))


def h_star_eval(ham: Hamiltonian, y: ImageLike) -> ExtendedReal:
    y = _checked(ham, y)
    if ham.kind is HamiltonianKind.QUADRATIC:
        return ExtendedReal.finite(0.5 * float(np.sum(y * y)))
    if not in_dom_h_star(ham, y):
        return ExtendedReal.infinity()
    if ham.kind is HamiltonianKind.POISSON_EXP:
        return ExtendedReal.finite(float(np.sum(xlogy(y, y) - y)))
    return ExtendedReal.finite(float(-np.sum(np.log(y))))


def grad_h(ham: Hamiltonian, p: ImageLike) -> np.ndarray:
    p = _checked(ham, p)
    if ham.kind is HamiltonianKind.QUADRATIC:
        return p.copy()
    if ham.kind is HamiltonianKind.POISSON_EXP:
        return np.exp(p)
    if not in_int_dom_h(ham, p):
        raise DomainError("∇H of burg_neglog needs every p_i < 0")
    return -1.0 / p


def grad_h_star(ham: Hamiltonian, y: ImageLike) -> np.ndarray:
    y = _checked(ham, y)
    if ham.kind is HamiltonianKind.QUADRATIC:
        return y.copy()
    if not in_int_dom_h_star(ham, y):
        raise DomainError(f"∇H* of {ham.kind.value} needs every y_i > {EPS_DOM:g}")
    if ham.kind is HamiltonianKind.POISSON_EXP:
        return np.log(y)
    return -1.0 / y


def scaled_h_star(ham: Hamiltonian, t: float, x: ImageLike) -> ExtendedReal:
    """(tH)*(x) = t·H*(x/t)."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    value = h_star_eval(ham, as_image(x) / t)
    return value if value.is_infinite else ExtendedReal.finite(t * value.value)


def fenchel_young_gap(ham: Hamiltonian, p: ImageLike, y: ImageLike) -> ExtendedReal:
    """H(p) + H*(y) − ⟨p, y⟩, nonnegative whenever finite."""
    p, y = _checked(ham, p), _checked(ham, y)
    total = h_eval(ham, p) + h_star_eval(ham, y)
    if total.is_infinite:
        return total
    return ExtendedReal.finite(total.value - float(np.sum(p * y)))


def _bregman_terms(ham: Hamiltonian, a: np.ndarray, u: np.ndarray) -> np.ndarray:
    if ham.kind is HamiltonianKind.QUADRATIC:
        return 0.5 * (a - u) ** 2
    if ham.kind is HamiltonianKind.POISSON_EXP:
        terms = xlogy(a, a / u) - a + u
    else:
        ratio = a / u
        terms = ratio - np.log(ratio) - 1.0
    # each term is a scalar Bregman distance, so clip rounding below zero
    return np.maximum(terms, 0.0)


def bregman_primal(ham: Hamiltonian, a: ImageLike, u: ImageLike) -> float:
    """D_{H*}(a, u) = H*(a) − H*(u) − ⟨∇H*(u), a − u⟩."""
    a, u = _checked(ham, a), _checked(ham, u)
    same_shape(a, u)
    if not in_dom_h_star(ham, a):
        raise DomainError(f"first argument is outside dom H* for {ham.kind.value}")
    if not in_int_dom_h_star(ham, u):
        raise DomainError(f"second argument is outside int dom H* for {ham.kind.value}")
    return float(np.sum(_bregman_terms(ham, a, u)))


def bregman_primal_dual(ham: Hamiltonian, a: ImageLike, p: ImageLike) -> float:
    """d_{H*}(a, p) = H*(a) + H(p) − ⟨p, a⟩."""
    a, p = _checked(ham, a), _checked(ham, p)
    same_shape(a, p)
    if not in_dom_h_star(ham, a):
        raise DomainError(f"first argument is outside dom H* for {ham.kind.value}")
    if not in_dom_h(ham, p):
        raise DomainError(f"second argument is outside dom H for {ham.kind.value}")
    gap = fenchel_young_gap(ham, p, a)
    if gap.is_infinite:
        raise DomainError("primal-dual Bregman distance is infinite")
    return gap.value


def bregman_scaling_check(ham: Hamiltonian, t: float, x: ImageLike, u: ImageLike) -> float:
    """|t·D_{H*}(x/t, u/t) − D_{(tH)*}(x, u)|, the scaling identity residual."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    x, u = _checked(ham, x), _checked(ham, u)
    lhs = t * bregman_primal(ham, x / t, u / t)

    fx, fu = scaled_h_star(ham, t, x), scaled_h_star(ham, t, u)
    if fx.is_infinite or fu.is_infinite:
        raise DomainError("(tH)* is infinite at one of the arguments")
    # ∇(tH)*(u) = ∇H*(u/t)
    rhs = fx.value - fu.value - float(np.sum(grad_h_star(ham, u / t) * (x - u)))
    return abs(lhs - rhs)
