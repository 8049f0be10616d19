"""Simulated user interactions: scribbles, clicks, boxes, and samplers.

Every simulator takes a target region (the label for positive prompts,
its complement for negative ones, or an error region for corrections)
and guarantees the generated prompt stays inside that region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .filters import gaussian_blur
from .grids import (
    BinaryMask,
    BoundingBox,
    Click,
    InteractionSet,
    NoRegionError,
    ScribbleMap,
    Sign,
    min_bounding_box,
)
from .morphology import (
    component_sizes,
    connected_components,
    euclidean_distance_transform,
    zhang_suen_thin,
)
from .rng import SeededRng
from .warping import random_deformation_field, warp

SCRIBBLE_KINDS = ("line", "centerline", "contour")
CLICK_STRATEGIES = ("random", "center", "border")
PROMPT_KINDS = ("scribbles", "clicks", "boxes")

_MAX_RETRIES = 8
_REFERENCE_SIDE = 128  # separation defaults are expressed at this image size


@dataclass(frozen=True)
class BreakMaskParams:
    """Noise/blur/threshold recipe for the mask that breaks scribbles apart."""

    noise_mean: float = 0.0
    noise_std: float = 1.0
    blur_sigma: float = 2.0

    def __post_init__(self):
        if self.noise_std <= 0:
            raise ValueError("noise_std must be > 0")
        if self.blur_sigma <= 0:
            raise ValueError("blur_sigma must be > 0")


@dataclass(frozen=True)
class ScribbleParams:
    blur_sigma: float = 2.0
    blur_kernel_size: int | None = None  # default 2*ceil(2*sigma)+1
    contour_threshold_range: tuple[float, float] = (0.0, 1.0)
    max_scribble_pixels: int = 128
    thickness: int = 1
    break_params: BreakMaskParams = field(default_factory=BreakMaskParams)
    field_max_disp: float = 4.0

    def __post_init__(self):
        lo, hi = self.contour_threshold_range
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError(f"bad contour threshold range [{lo},{hi}]")
        if self.max_scribble_pixels < 1:
            raise ValueError("max_scribble_pixels must be >= 1")
        if self.thickness < 1:
            raise ValueError("thickness must be >= 1")


@dataclass(frozen=True)
class ClickParams:
    border_threshold_range: tuple[float, float] = (0.0, 1.0)
    min_separation: int = 5
    blur_sigma: float = 2.0
    blur_kernel_size: int | None = None

    def __post_init__(self):
        if self.min_separation < 0:
            raise ValueError("min_separation must be >= 0")


@dataclass(frozen=True)
class PromptConfig:
    """Which prompt kinds are simulated and how many at a time."""

    enabled: tuple[str, ...] = PROMPT_KINDS
    scribble_kinds: tuple[str, ...] = SCRIBBLE_KINDS
    click_strategies: tuple[str, ...] = CLICK_STRATEGIES
    n_min: int = 1
    n_max: int = 3
    n_neg_min: int = 0
    box_jitter_max: int = 20
    scribble: ScribbleParams = field(default_factory=ScribbleParams)
    click: ClickParams = field(default_factory=ClickParams)

    def __post_init__(self):
        if not self.enabled:
            raise ValueError("at least one prompt kind must be enabled")
        for k in self.enabled:
            if k not in PROMPT_KINDS:
                raise ValueError(f"unknown prompt kind {k!r}")
        if not (1 <= self.n_min <= self.n_max):
            raise ValueError(f"need 1 <= n_min <= n_max, got [{self.n_min},{self.n_max}]")
        if self.n_neg_min < 0 or self.n_neg_min > self.n_max:
            raise ValueError("n_neg_min must lie in [0, n_max]")
        if self.box_jitter_max < 0:
            raise ValueError("box_jitter_max must be >= 0")


def make_break_mask(shape: tuple[int, int], rng: SeededRng, params: BreakMaskParams) -> BinaryMask:
    """Smooth random pass mask; roughly half the pixels survive.

    Per-pixel normal noise is blurred and thresholded at its own mean.
    The mean is subtracted before blurring so border padding cannot bias
    the threshold.
    """
    noise = rng.gen.normal(0.0, params.noise_std, size=shape).astype(np.float32)
    blurred = gaussian_blur(noise, params.blur_sigma)
    return BinaryMask(blurred > 0.0)


def _region_pixels(region: BinaryMask) -> np.ndarray:
    pix = np.argwhere(region.as_bool())
    if len(pix) == 0:
        raise NoRegionError("region is empty")
    return pix


def _rasterize_segment(p0, p1, shape: tuple[int, int], thickness: int) -> np.ndarray:
    """Dense line rasterization between two pixels, optionally dilated."""
    n = int(max(abs(int(p1[0]) - int(p0[0])), abs(int(p1[1]) - int(p0[1])))) * 2 + 1
    rows = np.rint(np.linspace(p0[0], p1[0], n)).astype(np.int64)
    cols = np.rint(np.linspace(p0[1], p1[1], n)).astype(np.int64)
    seg = np.zeros(shape, dtype=bool)
    seg[rows, cols] = True
    if thickness > 1:
        r = thickness / 2.0
        k = int(np.floor(r))
        yy, xx = np.mgrid[-k : k + 1, -k : k + 1]
        seg = ndimage.binary_dilation(seg, structure=(yy**2 + xx**2) <= r**2)
    return seg


def _truncate_support(support: np.ndarray, max_pixels: int, rng: SeededRng) -> np.ndarray:
    """Cap support size, keeping whole connected pieces near a random seed.

    Components are kept greedily in order of distance from a randomly
    chosen seed component; if even the seed exceeds the budget, its
    pixels farthest from a random seed pixel are discarded.
    """
    count = int(support.sum())
    if count <= max_pixels:
        return support
    comps = connected_components(BinaryMask(support), connectivity=8)
    sizes = component_sizes(comps)
    ids = np.arange(1, comps.num_labels)
    seed_id = int(rng.gen.choice(ids))

    centroids = np.array(ndimage.center_of_mass(support, comps.data, ids))
    seed_centroid = centroids[seed_id - 1]
    dist = np.sqrt(((centroids - seed_centroid) ** 2).sum(axis=1))
    order = ids[np.lexsort((ids, dist))]

    kept = np.zeros_like(support)
    budget = max_pixels
    for cid in order:
        size = int(sizes[cid - 1])
        comp = comps.data == cid
        if size <= budget:
            kept |= comp
            budget -= size
        elif cid == seed_id:
            pix = np.argwhere(comp)
            anchor = pix[int(rng.gen.integers(len(pix)))]
            d = ((pix - anchor) ** 2).sum(axis=1)
            keep_idx = np.lexsort((pix[:, 1], pix[:, 0], d))[:budget]
            kept[pix[keep_idx, 0], pix[keep_idx, 1]] = True
            budget = 0
        if budget <= 0:
            break
    return kept


def _finalize_scribble(
    raw: np.ndarray, region: BinaryMask, params: ScribbleParams, rng: SeededRng, sign: Sign
) -> ScribbleMap | None:
    """Warp, clip to the region, and cap the support; None if nothing remains."""
    fld = random_deformation_field(raw.shape, rng.derive("field"), params.field_max_disp)
    warped = warp(raw.astype(np.float32), fld)
    clipped = warped * region.data
    support = clipped > 0.0
    if not support.any():
        return None
    kept = _truncate_support(support, params.max_scribble_pixels, rng.derive("cap"))
    final = np.where(kept, clipped, 0.0).astype(np.float32)
    if not final.any():
        return None
    return ScribbleMap(final, sign)


def _fallback_scribble(region: BinaryMask, sign: Sign) -> ScribbleMap:
    # deterministic single-pixel scribble at the region's deepest point
    edt = euclidean_distance_transform(region)
    r, c = np.unravel_index(int(np.argmax(edt)), edt.shape)
    out = np.zeros(region.shape, dtype=np.float32)
    out[r, c] = 1.0
    return ScribbleMap(out, sign)


def sim_line_scribble(
    region: BinaryMask, rng: SeededRng, params: ScribbleParams, sign: Sign = "pos"
) -> ScribbleMap:
    """Straight stroke between two random region pixels, warped and clipped."""
    pix = _region_pixels(region)
    for attempt in range(_MAX_RETRIES):
        sub = rng.derive("line", attempt)
        idx = sub.gen.integers(len(pix), size=2)
        raw = _rasterize_segment(pix[idx[0]], pix[idx[1]], region.shape, params.thickness)
        out = _finalize_scribble(raw, region, params, sub, sign)
        if out is not None:
            return out
    return _fallback_scribble(region, sign)


def sim_centerline_scribble(
    region: BinaryMask, rng: SeededRng, params: ScribbleParams, sign: Sign = "pos"
) -> ScribbleMap:
    """Skeleton stroke broken into pieces, warped and clipped."""
    _region_pixels(region)
    skeleton = zhang_suen_thin(region).data
    for attempt in range(_MAX_RETRIES):
        sub = rng.derive("centerline", attempt)
        breaker = make_break_mask(region.shape, sub.derive("break"), params.break_params)
        raw = skeleton * breaker.data
        out = _finalize_scribble(raw, region, params, sub, sign)
        if out is not None:
            return out
    return _fallback_scribble(region, sign)


def _shrunk_mask(region: BinaryMask, blur_sigma: float, kernel_size: int | None) -> np.ndarray:
    """min(y, blur(y)): the mask with values pulled down near its boundary."""
    blurred = gaussian_blur(region.data, blur_sigma, kernel_size)
    return np.minimum(region.data, blurred)


def sim_contour_scribble(
    region: BinaryMask, rng: SeededRng, params: ScribbleParams, sign: Sign = "pos"
) -> ScribbleMap:
    """Rough inner contour of the region at a random blurred-mask level."""
    pix = _region_pixels(region)
    if len(pix) < 9:
        return sim_line_scribble(region, rng.derive("tiny"), params, sign)
    shrunk = _shrunk_mask(region, params.blur_sigma, params.blur_kernel_size)
    vals = shrunk[region.as_bool()]
    lo_val, hi_val = float(vals.min()), float(vals.max())
    f_lo, f_hi = params.contour_threshold_range
    for attempt in range(_MAX_RETRIES):
        sub = rng.derive("contour", attempt)
        frac = float(sub.gen.uniform(f_lo, f_hi))
        level = lo_val + frac * (hi_val - lo_val)
        above = shrunk >= level
        if not above.any():
            continue
        # inner contour: pixels at the level set's rim (off-grid counts as below)
        h, w = above.shape
        padded = np.zeros((h + 2, w + 2), dtype=bool)
        padded[1 : h + 1, 1 : w + 1] = above
        interior = (
            padded[0:h, 1 : w + 1] & padded[2 : h + 2, 1 : w + 1]
            & padded[1 : h + 1, 0:w] & padded[1 : h + 1, 2 : w + 2]
        )
        contour = above & ~interior & region.as_bool()
        if not contour.any():
            continue
        breaker = make_break_mask(region.shape, sub.derive("break"), params.break_params)
        raw = contour & breaker.as_bool()
        out = _finalize_scribble(raw.astype(np.float32), region, params, sub, sign)
        if out is not None:
            return out
    return sim_line_scribble(region, rng.derive("contour_fallback"), params, sign)


def effective_separation(min_separation: int, shape: tuple[int, int]) -> int:
    """Scale the configured separation (defined at 128 px) to this image."""
    return int(round(min_separation * max(shape) / _REFERENCE_SIDE))


def _greedy_separated(
    candidates: np.ndarray, n: int, separation: int, rng: SeededRng
) -> np.ndarray:
    """Pick up to n points with pairwise distance >= separation, relaxing
    the separation when the region cannot fit n separated points."""
    order = rng.gen.permutation(len(candidates))
    chosen: list[np.ndarray] = []
    used = np.zeros(len(candidates), dtype=bool)
    sep = separation
    while len(chosen) < n:
        progress = False
        for i in order:
            if used[i]:
                continue
            p = candidates[i]
            if all(((p - q) ** 2).sum() >= sep * sep for q in chosen):
                chosen.append(p)
                used[i] = True
                progress = True
                if len(chosen) == n:
                    break
        if len(chosen) == n or used.all():
            break
        if not progress and sep == 0:
            break
        sep = sep // 2 if sep > 1 else 0
    return np.array(chosen, dtype=np.int64)


def _component_center(comp_mask: np.ndarray) -> tuple[int, int]:
    edt = euclidean_distance_transform(BinaryMask(comp_mask))
    r, c = np.unravel_index(int(np.argmax(edt)), edt.shape)
    return int(r), int(c)


def sim_clicks(
    region: BinaryMask,
    strategy: str,
    n: int,
    rng: SeededRng,
    params: ClickParams,
    sign: Sign = "pos",
) -> list[Click]:
    """Simulate n clicks inside the region using one placement strategy."""
    if strategy not in CLICK_STRATEGIES:
        raise ValueError(f"unknown click strategy {strategy!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    pix = _region_pixels(region)

    if strategy == "center":
        comps = connected_components(region, connectivity=8)
        sizes = component_sizes(comps)
        ids = np.arange(1, comps.num_labels)
        order = ids[np.lexsort((ids, -sizes))]
        points = [_component_center(comps.data == cid) for cid in order[:n]]
        return [Click(r, c, sign) for r, c in points]

    if len(pix) <= n:
        # relaxation: fewer region pixels than requested clicks
        return [Click(int(r), int(c), sign) for r, c in pix]

    sep = effective_separation(params.min_separation, region.shape)
    if strategy == "random":
        candidates = pix
    else:  # border
        shrunk = _shrunk_mask(region, params.blur_sigma, params.blur_kernel_size)
        vals = shrunk[region.as_bool()]
        lo_val, hi_val = float(vals.min()), float(vals.max())
        f_lo, f_hi = params.border_threshold_range
        candidates = np.empty((0, 2), dtype=np.int64)
        for attempt in range(_MAX_RETRIES):
            sub = rng.derive("band", attempt)
            fa, fb = np.sort(sub.gen.uniform(f_lo, f_hi, size=2))
            a = lo_val + float(fa) * (hi_val - lo_val)
            b = lo_val + float(fb) * (hi_val - lo_val)
            band = region.as_bool() & (shrunk >= a) & (shrunk <= b)
            if band.any():
                candidates = np.argwhere(band)
                break
        if len(candidates) == 0:
            candidates = pix  # degenerate band: fall back to the whole region

    points = _greedy_separated(candidates, n, sep, rng.derive("pick"))
    if len(points) < n and strategy == "border":
        # band too small: top up from the rest of the region
        taken = {(int(r), int(c)) for r, c in points}
        rest = np.array([p for p in pix if (int(p[0]), int(p[1])) not in taken], dtype=np.int64)
        if len(rest):
            extra = _greedy_separated(rest, n - len(points), sep, rng.derive("topup"))
            points = np.vstack([points, extra]) if len(points) else extra
    return [Click(int(r), int(c), sign) for r, c in points]


def sim_bbox(region: BinaryMask, rng: SeededRng, jitter_max: int = 20) -> BoundingBox:
    """Minimal enclosing box, each side pushed outward by U{0..jitter_max} px."""
    box = min_bounding_box(region)
    if jitter_max < 0:
        raise ValueError("jitter_max must be >= 0")
    grow = rng.gen.integers(0, jitter_max + 1, size=4)
    return BoundingBox(
        box.row_min - int(grow[0]),
        box.col_min - int(grow[1]),
        box.row_max + int(grow[2]),
        box.col_max + int(grow[3]),
    ).clipped(region.shape)


def _nonempty_subsets(items: tuple[str, ...]) -> list[tuple[str, ...]]:
    subsets = []
    for bits in range(1, 2 ** len(items)):
        subsets.append(tuple(k for i, k in enumerate(items) if bits >> i & 1))
    return subsets


def _simulate_scribble(
    region: BinaryMask, kind: str, rng: SeededRng, params: ScribbleParams, sign: Sign
) -> ScribbleMap:
    if kind == "line":
        return sim_line_scribble(region, rng, params, sign)
    if kind == "centerline":
        return sim_centerline_scribble(region, rng, params, sign)
    if kind == "contour":
        return sim_contour_scribble(region, rng, params, sign)
    raise ValueError(f"unknown scribble kind {kind!r}")


def sample_initial_prompts(
    y: BinaryMask, rng: SeededRng, config: PromptConfig
) -> InteractionSet:
    """First-step prompts: a random nonempty combination of enabled kinds,
    positives simulated on the label and negatives on its complement."""
    if y.is_empty():
        raise NoRegionError("label is empty")
    combos = _nonempty_subsets(config.enabled)
    combo = combos[int(rng.gen.integers(len(combos)))]
    background = y.complement()

    pos_scribbles: list[ScribbleMap] = []
    neg_scribbles: list[ScribbleMap] = []
    clicks: list[Click] = []
    boxes: list[BoundingBox] = []

    for kind in combo:
        if kind == "boxes":
            boxes.append(sim_bbox(y, rng.derive("box"), config.box_jitter_max))
            continue
        n_pos = int(rng.gen.integers(config.n_min, config.n_max + 1))
        n_neg = int(rng.gen.integers(config.n_neg_min, config.n_max + 1))
        if kind == "scribbles":
            for i in range(n_pos):
                sk = config.scribble_kinds[int(rng.gen.integers(len(config.scribble_kinds)))]
                pos_scribbles.append(
                    _simulate_scribble(y, sk, rng.derive("ps", i), config.scribble, "pos")
                )
            if not background.is_empty():
                for i in range(n_neg):
                    sk = config.scribble_kinds[int(rng.gen.integers(len(config.scribble_kinds)))]
                    neg_scribbles.append(
                        _simulate_scribble(background, sk, rng.derive("ns", i), config.scribble, "neg")
                    )
        elif kind == "clicks":
            st = config.click_strategies[int(rng.gen.integers(len(config.click_strategies)))]
            clicks.extend(sim_clicks(y, st, n_pos, rng.derive("pc"), config.click, "pos"))
            if n_neg > 0 and not background.is_empty():
                st = config.click_strategies[int(rng.gen.integers(len(config.click_strategies)))]
                clicks.extend(
                    sim_clicks(background, st, n_neg, rng.derive("nc"), config.click, "neg")
                )
    return InteractionSet(
        pos_scribbles=tuple(pos_scribbles),
        neg_scribbles=tuple(neg_scribbles),
        clicks=tuple(clicks),
        boxes=tuple(boxes),
    )


def sample_corrections(
    false_neg: BinaryMask, false_pos: BinaryMask, rng: SeededRng, config: PromptConfig
) -> InteractionSet:
    """Correction prompts for one refinement step.

    Scribbles or clicks are chosen with equal probability; each correction
    targets whichever error region currently has more uncovered pixels
    (positive corrections on false negatives, negative on false positives).
    """
    if false_neg.is_empty() and false_pos.is_empty():
        return InteractionSet()
    kinds = [k for k in config.enabled if k in ("scribbles", "clicks")]
    if not kinds:
        return InteractionSet()
    kind = kinds[int(rng.gen.integers(len(kinds)))]
    n_cor = int(rng.gen.integers(config.n_min, config.n_max + 1))

    remaining = {"pos": false_neg.as_bool().copy(), "neg": false_pos.as_bool().copy()}
    pos_scribbles: list[ScribbleMap] = []
    neg_scribbles: list[ScribbleMap] = []
    clicks: list[Click] = []
    for i in range(n_cor):
        counts = {s: int(m.sum()) for s, m in remaining.items()}
        if counts["pos"] == 0 and counts["neg"] == 0:
            break
        sign: Sign = "pos" if counts["pos"] >= counts["neg"] else "neg"
        if counts[sign] == 0:
            sign = "neg" if sign == "pos" else "pos"
        target = BinaryMask(remaining[sign])
        sub = rng.derive("cor", i)
        if kind == "clicks":
            st = config.click_strategies[int(sub.gen.integers(len(config.click_strategies)))]
            picked = sim_clicks(target, st, 1, sub, config.click, sign)
            clicks.extend(picked)
            for c in picked:
                remaining[sign][c.row, c.col] = False
        else:
            sk = config.scribble_kinds[int(sub.gen.integers(len(config.scribble_kinds)))]
            s = _simulate_scribble(target, sk, sub, config.scribble, sign)
            (pos_scribbles if sign == "pos" else neg_scribbles).append(s)
            remaining[sign] &= ~s.support()
    return InteractionSet(
        pos_scribbles=tuple(pos_scribbles),
        neg_scribbles=tuple(neg_scribbles),
        clicks=tuple(clicks),
    )
