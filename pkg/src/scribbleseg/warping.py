"""Smooth random deformation fields and backward bilinear warping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import SeededRng


@dataclass(frozen=True)
class DeformationField:
    """Per-pixel displacements (dr, dc) in pixels."""

    dr: np.ndarray
    dc: np.ndarray

    def __post_init__(self):
        if self.dr.shape != self.dc.shape or self.dr.ndim != 2:
            raise ValueError("deformation components must be matching 2-D grids")
        if not (np.all(np.isfinite(self.dr)) and np.all(np.isfinite(self.dc))):
            raise ValueError("deformation field contains non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.dr.shape

    def max_magnitude(self) -> float:
        return float(np.sqrt(self.dr**2 + self.dc**2).max())


def _upsample_bilinear(coarse: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Resize a coarse control grid to `shape` with bilinear interpolation."""
    ch, cw = coarse.shape
    h, w = shape
    if ch == 1 and cw == 1:
        return np.full(shape, coarse[0, 0], dtype=np.float32)
    rows = np.linspace(0.0, ch - 1.0, h, dtype=np.float32)
    cols = np.linspace(0.0, cw - 1.0, w, dtype=np.float32)
    r0 = np.clip(np.floor(rows).astype(np.int64), 0, ch - 2) if ch > 1 else np.zeros(h, np.int64)
    c0 = np.clip(np.floor(cols).astype(np.int64), 0, cw - 2) if cw > 1 else np.zeros(w, np.int64)
    fr = (rows - r0).astype(np.float32)[:, None]
    fc = (cols - c0).astype(np.float32)[None, :]
    r1 = np.minimum(r0 + 1, ch - 1)
    c1 = np.minimum(c0 + 1, cw - 1)
    a = coarse[np.ix_(r0, c0)]
    b = coarse[np.ix_(r0, c1)]
    c = coarse[np.ix_(r1, c0)]
    d = coarse[np.ix_(r1, c1)]
    top = a * (1 - fc) + b * fc
    bot = c * (1 - fc) + d * fc
    return (top * (1 - fr) + bot * fr).astype(np.float32)


def random_deformation_field(
    shape: tuple[int, int],
    rng: SeededRng,
    max_disp: float,
    control_points: int = 8,
) -> DeformationField:
    """Smooth field from a coarse normal control grid, bilinearly upsampled.

    The field is rescaled so its largest magnitude equals a random
    amplitude drawn from U[0, max_disp]; max_disp=0 gives the identity.
    """
    if max_disp < 0:
        raise ValueError("max_disp must be >= 0")
    if max_disp == 0:
        zero = np.zeros(shape, dtype=np.float32)
        return DeformationField(zero, zero.copy())
    cp = max(2, int(control_points))
    coarse_r = rng.gen.normal(size=(cp, cp)).astype(np.float32)
    coarse_c = rng.gen.normal(size=(cp, cp)).astype(np.float32)
    amplitude = float(rng.gen.uniform(0.0, max_disp))
    dr = _upsample_bilinear(coarse_r, shape)
    dc = _upsample_bilinear(coarse_c, shape)
    mag = float(np.sqrt(dr**2 + dc**2).max())
    scale = amplitude / mag if mag > 0 else 0.0
    return DeformationField(dr * scale, dc * scale)


def warp(grid: np.ndarray, field: DeformationField) -> np.ndarray:
    """Backward warp with bilinear sampling and zero padding outside.

    out[r, c] samples the input at (r + dr[r,c], c + dc[r,c]); a uniform
    field of (0, +1) therefore shifts content one column toward lower c.
    """
    arr = np.asarray(grid, dtype=np.float32)
    if arr.shape != field.shape:
        raise ValueError(f"grid shape {arr.shape} != field shape {field.shape}")
    h, w = arr.shape
    rows = np.arange(h, dtype=np.float32)[:, None] + field.dr
    cols = np.arange(w, dtype=np.float32)[None, :] + field.dc

    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    fr = rows - r0
    fc = cols - c0

    padded = np.zeros((h + 2, w + 2), dtype=np.float32)
    padded[1 : h + 1, 1 : w + 1] = arr

    def tap(ri, ci):
        # clip into the zero ring: anything outside [-1, h] lands on zeros
        return padded[np.clip(ri + 1, 0, h + 1), np.clip(ci + 1, 0, w + 1)]

    out = (
        tap(r0, c0) * (1 - fr) * (1 - fc)
        + tap(r0, c0 + 1) * (1 - fr) * fc
        + tap(r0 + 1, c0) * fr * (1 - fc)
        + tap(r0 + 1, c0 + 1) * fr * fc
    )
    return out.astype(np.float32)
