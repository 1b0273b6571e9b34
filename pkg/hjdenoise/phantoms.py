"""Deterministic synthetic test images."""

import numpy as np

from .errors import DimensionError


def piecewise_constant_phantom(rows: int = 128, cols: int = 128, low: float = 0.2,
                               high: float = 0.8) -> np.ndarray:
    """Background `low` with a bright rectangle, a disc, and a mid-gray bar."""
    if rows < 4 or cols < 4:
        raise DimensionError(f"phantom needs at least 4x4 pixels, got {rows}x{cols}")
    image = np.full((rows, cols), low)
    image[rows // 8: rows // 2, cols // 8: cols // 2] = high

    rr, cc = np.mgrid[0:rows, 0:cols]
    radius = min(rows, cols) / 6.0
    disc = (rr - 0.65 * rows) ** 2 + (cc - 0.65 * cols) ** 2 <= radius ** 2
    image[disc] = 0.5 * (low + high) + 0.25 * (high - low)

    image[rows - rows // 6: rows - rows // 12, cols // 8: cols - cols // 8] = 0.5 * (low + high)
    return image


def ramp_phantom(rows: int = 64, cols: int = 64, low: float = 0.1, high: float = 1.0) -> np.ndarray:
    """Horizontal linear ramp from `low` to `high`."""
    if rows < 1 or cols < 2:
        raise DimensionError(f"ramp needs at least 1x2 pixels, got {rows}x{cols}")
    return np.tile(np.linspace(low, high, cols), (rows, 1))


def two_pixel_phantom(left: float = 1.0, right: float = 2.0) -> np.ndarray:
    return np.array([[left, right]], dtype=np.float64)
