"""
Image carrier and extended-real results.

An image is a 2D float64 numpy array (n1 rows by n2 columns, row-major);
x, v, w, y and p all travel in this form. Vectors given as flat sequences
are read as a single row.
"""

import math
from typing import Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import DimensionError, InputError

ImageLike = Union[np.ndarray, Sequence[float], Sequence[Sequence[float]], float]


def as_image(data: ImageLike) -> np.ndarray:
    """Return `data` as a finite 2D float64 array (a copy is not guaranteed)."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise DimensionError(f"images are 2D, got an array with {arr.ndim} dimensions")
    if arr.size == 0:
        raise DimensionError("images need at least one pixel")
    if not np.all(np.isfinite(arr)):
        raise InputError("image contains non-finite values")
    return arr


def from_rows(rows: int, cols: int, data: Sequence[float]) -> np.ndarray:
    """Build an image from its row-major pixel sequence."""
    if rows <= 0 or cols <= 0:
        raise DimensionError(f"image shape must be positive, got {rows}x{cols}")
    if len(data) != rows * cols:
        raise DimensionError(f"expected {rows * cols} pixels for {rows}x{cols}, got {len(data)}")
    return as_image(np.asarray(data, dtype=np.float64).reshape(rows, cols))


def same_shape(a: np.ndarray, b: np.ndarray, what: str = "images") -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what} differ in shape: {a.shape} vs {b.shape}")


class ExtendedReal(BaseModel):
    """A value in R ∪ {+∞}; infinity is a flag, never a sentinel float."""

    model_config = ConfigDict(frozen=True)

    value: float = Field(default=0.0, description="Finite value when is_infinite is false")
    is_infinite: bool = Field(default=False, description="True for the +infinity marker")

    @classmethod
    def finite(cls, value: float) -> "ExtendedReal":
        if not math.isfinite(value):
            raise ValueError(f"finite value expected, got {value}")
        return cls(value=float(value))

    @classmethod
    def infinity(cls) -> "ExtendedReal":
        return cls(value=0.0, is_infinite=True)

    def __float__(self) -> float:
        return math.inf if self.is_infinite else self.value

    def __add__(self, other: "ExtendedReal") -> "ExtendedReal":
        if self.is_infinite or other.is_infinite:
            return ExtendedReal.infinity()
        return ExtendedReal.finite(self.value + other.value)

    def __repr__(self) -> str:
        return "ExtendedReal(+inf)" if self.is_infinite else f"ExtendedReal({self.value!r})"
