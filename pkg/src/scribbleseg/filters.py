"""Small shared image filters."""

from __future__ import annotations

import numpy as np
from scipy import ndimage


def gaussian_blur(
    grid: np.ndarray, sigma: float, kernel_size: int | None = None, mode: str = "constant"
) -> np.ndarray:
    """Gaussian blur; zero padding by default (mask semantics), or "reflect"
    for intensity images where the border must not darken.

    kernel_size fixes the truncation radius ((k-1)/2 pixels); by default
    the kernel spans 2*ceil(2*sigma)+1 taps.
    """
    arr = np.asarray(grid, dtype=np.float32)
    if sigma <= 0:
        return arr.copy()
    if kernel_size is None:
        radius = int(np.ceil(2.0 * sigma))
    else:
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and >= 1, got {kernel_size}")
        radius = (kernel_size - 1) // 2
    truncate = max(radius, 1) / sigma
    return ndimage.gaussian_filter(
        arr, sigma=sigma, mode=mode, cval=0.0, truncate=truncate
    ).astype(np.float32)
