"""Training-time joint augmentation of an image and its label.

Transforms fire independently with their configured probabilities, in a
fixed order: affine, brightness/contrast, blur, noise, elastic,
sharpness, horizontal flip, vertical flip. Geometric transforms move the
label identically to the image (nearest-neighbor, then re-binarized);
photometric transforms touch only the image, which is re-clamped to [0,1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filters import gaussian_blur
from .grids import BinaryMask, Image2D
from .rng import SeededRng
from .warping import DeformationField, warp


@dataclass(frozen=True)
class AugmentConfig:
    affine_prob: float = 0.5
    affine_degrees: tuple[float, float] = (0.0, 360.0)
    affine_translation: tuple[float, float] = (0.0, 0.2)
    affine_scale: tuple[float, float] = (0.8, 1.1)
    brightness_contrast_prob: float = 0.5
    brightness: tuple[float, float] = (-0.1, 0.1)
    contrast: tuple[float, float] = (0.8, 1.2)
    blur_prob: float = 0.5
    blur_sigma: tuple[float, float] = (0.1, 1.1)
    blur_kernel: int = 5
    noise_prob: float = 0.5
    noise_mean: tuple[float, float] = (0.0, 0.05)
    noise_std: tuple[float, float] = (0.0, 0.05)
    elastic_prob: float = 0.25
    elastic_alpha: tuple[float, float] = (1.0, 2.0)
    elastic_sigma: tuple[float, float] = (6.0, 8.0)
    sharpness_prob: float = 0.5
    sharpness: float = 5.0
    hflip_prob: float = 0.5
    vflip_prob: float = 0.5

    def __post_init__(self):
        for name in (
            "affine_prob", "brightness_contrast_prob", "blur_prob", "noise_prob",
            "elastic_prob", "sharpness_prob", "hflip_prob", "vflip_prob",
        ):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0,1], got {p}")

    @classmethod
    def identity(cls) -> "AugmentConfig":
        return cls(
            affine_prob=0.0, brightness_contrast_prob=0.0, blur_prob=0.0,
            noise_prob=0.0, elastic_prob=0.0, sharpness_prob=0.0,
            hflip_prob=0.0, vflip_prob=0.0,
        )


def _sample_bilinear_zero(arr: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    h, w = arr.shape
    padded = np.zeros((h + 2, w + 2), dtype=np.float32)
    padded[1 : h + 1, 1 : w + 1] = arr
    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    fr = (rows - r0).astype(np.float32)
    fc = (cols - c0).astype(np.float32)

    def tap(ri, ci):
        return padded[np.clip(ri + 1, 0, h + 1), np.clip(ci + 1, 0, w + 1)]

    return (
        tap(r0, c0) * (1 - fr) * (1 - fc)
        + tap(r0, c0 + 1) * (1 - fr) * fc
        + tap(r0 + 1, c0) * fr * (1 - fc)
        + tap(r0 + 1, c0 + 1) * fr * fc
    ).astype(np.float32)


def _sample_nearest_zero(arr: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    h, w = arr.shape
    ri = np.rint(rows).astype(np.int64)
    ci = np.rint(cols).astype(np.int64)
    inside = (ri >= 0) & (ri < h) & (ci >= 0) & (ci < w)
    out = np.zeros(arr.shape, dtype=np.float32)
    out[inside] = arr[np.clip(ri, 0, h - 1), np.clip(ci, 0, w - 1)][inside]
    return out


def _affine_coords(
    shape: tuple[int, int], angle_deg: float, translate_rc: tuple[float, float], scale: float
) -> tuple[np.ndarray, np.ndarray]:
    """Source coordinates of the inverse affine map about the grid center."""
    h, w = shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rr, cc = np.mgrid[:h, :w].astype(np.float32)
    r = rr - cy - translate_rc[0]
    c = cc - cx - translate_rc[1]
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    # inverse rotation and scale
    src_r = (cos_t * r + sin_t * c) / scale + cy
    src_c = (-sin_t * r + cos_t * c) / scale + cx
    return src_r.astype(np.float32), src_c.astype(np.float32)


def augment_pair(
    image: Image2D, y: BinaryMask, rng: SeededRng, config: AugmentConfig
) -> tuple[Image2D, BinaryMask]:
    """Apply the augmentation table to the pair; label may come back empty."""
    if image.shape != y.shape:
        raise ValueError(f"image shape {image.shape} != label shape {y.shape}")
    img = image.data.copy()
    lab = y.data.copy()
    g = rng.gen

    if g.uniform() < config.affine_prob:
        angle = float(g.uniform(*config.affine_degrees))
        t_lo, t_hi = config.affine_translation
        tr = float(g.uniform(t_lo, t_hi)) * img.shape[0] * (1 if g.uniform() < 0.5 else -1)
        tc = float(g.uniform(t_lo, t_hi)) * img.shape[1] * (1 if g.uniform() < 0.5 else -1)
        scale = float(g.uniform(*config.affine_scale))
        rows, cols = _affine_coords(img.shape, angle, (tr, tc), scale)
        img = _sample_bilinear_zero(img, rows, cols)
        lab = (_sample_nearest_zero(lab, rows, cols) > 0.5).astype(np.float32)

    if g.uniform() < config.brightness_contrast_prob:
        brightness = float(g.uniform(*config.brightness))
        contrast = float(g.uniform(*config.contrast))
        mean = float(img.mean())
        img = (img - mean) * contrast + mean + brightness

    if g.uniform() < config.blur_prob:
        sigma = float(g.uniform(*config.blur_sigma))
        img = gaussian_blur(img, sigma, kernel_size=config.blur_kernel, mode="reflect")

    if g.uniform() < config.noise_prob:
        mu = float(g.uniform(*config.noise_mean))
        sd = float(g.uniform(*config.noise_std))
        img = img + g.normal(mu, max(sd, 1e-8), size=img.shape).astype(np.float32)

    if g.uniform() < config.elastic_prob:
        alpha = float(g.uniform(*config.elastic_alpha))
        sigma = float(g.uniform(*config.elastic_sigma))
        dr = gaussian_blur(g.uniform(-1, 1, img.shape).astype(np.float32), sigma) * alpha
        dc = gaussian_blur(g.uniform(-1, 1, img.shape).astype(np.float32), sigma) * alpha
        fld = DeformationField(dr, dc)
        img = warp(img, fld)
        rows = np.arange(img.shape[0], dtype=np.float32)[:, None] + fld.dr
        cols = np.arange(img.shape[1], dtype=np.float32)[None, :] + fld.dc
        lab = (_sample_nearest_zero(lab, rows, cols) > 0.5).astype(np.float32)

    if g.uniform() < config.sharpness_prob:
        smooth = gaussian_blur(img, 1.0, kernel_size=3, mode="reflect")
        img = smooth + config.sharpness * (img - smooth)

    if g.uniform() < config.hflip_prob:
        img = img[:, ::-1]
        lab = lab[:, ::-1]

    if g.uniform() < config.vflip_prob:
        img = img[::-1, :]
        lab = lab[::-1, :]

    img = np.clip(img, 0.0, 1.0)
    return Image2D(np.ascontiguousarray(img)), BinaryMask(np.ascontiguousarray(lab))
