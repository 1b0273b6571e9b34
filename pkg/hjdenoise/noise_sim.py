"""
Seeded Poisson and Gamma (multiplicative) noise.

Every pixel draws from its own Philox substream keyed by the seed with the
pixel index in the high counter word, so the output does not depend on the
order in which pixels are visited.
"""

import logging
import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import gammaln

from .errors import DomainError, InputError
from .images import ImageLike, as_image

logger = logging.getLogger(__name__)

KNUTH_RATE_LIMIT = 30.0


class NoiseKind(str, Enum):
    POISSON = "poisson"
    GAMMA_MULTIPLICATIVE = "gamma_multiplicative"


class NoiseSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: NoiseKind
    t: float = Field(gt=0, description="Exposure time, or number of looks L for gamma noise")
    seed: int = Field(default=0, ge=0, lt=2 ** 64, description="64-bit seed")

    @model_validator(mode="after")
    def _integer_looks(self):
        if self.kind is NoiseKind.GAMMA_MULTIPLICATIVE and not float(self.t).is_integer():
            raise ValueError(f"gamma noise needs an integer number of looks, got t={self.t}")
        return self


def pixel_generator(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one pixel: key = seed, counter starts at index·2^192."""
    return np.random.Generator(np.random.Philox(key=seed, counter=index << 192))


def _knuth_poisson(rng: np.random.Generator, rate: float) -> int:
    limit = math.exp(-rate)
    k = 0
    p = rng.random()
    while p > limit:
        k += 1
        p *= rng.random()
    return k


def _ptrs_poisson(rng: np.random.Generator, rate: float) -> int:
    """Hörmann's transformed rejection with squeeze."""
    log_rate = math.log(rate)
    b = 0.931 + 2.53 * math.sqrt(rate)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)

    while True:
        u = rng.random() - 0.5
        v = rng.random()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + rate + 0.43)
        if us >= 0.07 and v <= vr:
            return k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= -rate + k * log_rate - gammaln(k + 1)):
            return k


def sample_poisson(rng: np.random.Generator, rate: float) -> int:
    if rate < KNUTH_RATE_LIMIT:
        return _knuth_poisson(rng, rate)
    return _ptrs_poisson(rng, rate)


def poisson_corrupt(v: ImageLike, spec: NoiseSpec) -> np.ndarray:
    """Counts x with xᵢ ~ Poisson(t·vᵢ), as a float image."""
    v = as_image(v)
    if spec.kind is not NoiseKind.POISSON:
        raise InputError(f"poisson_corrupt called with a {spec.kind.value} spec")
    if np.any(v < 0):
        raise DomainError("Poisson rates must be nonnegative")

    rates = spec.t * v.ravel()
    counts = np.array([sample_poisson(pixel_generator(spec.seed, i), rate) for i, rate in enumerate(rates)],
                      dtype=np.float64)
    logger.debug("poisson noise: %d pixels, t=%g, seed=%d", counts.size, spec.t, spec.seed)
    return counts.reshape(v.shape)


def gamma_corrupt(v: ImageLike, spec: NoiseSpec) -> np.ndarray:
    """x = L·z where z averages L exponentials of mean vᵢ; x/t is the observed image."""
    v = as_image(v)
    if spec.kind is not NoiseKind.GAMMA_MULTIPLICATIVE:
        raise InputError(f"gamma_corrupt called with a {spec.kind.value} spec")
    if np.any(v <= 0):
        raise DomainError("multiplicative noise needs a strictly positive image")

    looks = int(spec.t)
    flat = v.ravel()
    sums = np.empty(flat.size)
    for i in range(flat.size):
        uniforms = pixel_generator(spec.seed, i).random(looks)
        # inverse CDF of Exp(1); 1 − U lies in (0, 1]
        sums[i] = float(np.sum(-np.log1p(-uniforms)))
    logger.debug("gamma noise: %d pixels, L=%d, seed=%d", flat.size, looks, spec.seed)
    return (flat * sums).reshape(v.shape)


def corrupt(v: ImageLike, spec: NoiseSpec) -> np.ndarray:
    if spec.kind is NoiseKind.POISSON:
        return poisson_corrupt(v, spec)
    return gamma_corrupt(v, spec)
