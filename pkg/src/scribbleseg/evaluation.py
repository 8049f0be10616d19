"""Metrics, simulated interaction protocols, and the latency benchmark."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import DatasetIndex
from .encoding import compute_error_region
from .grids import (
    BinaryMask,
    Click,
    Image2D,
    InteractionSet,
    NoRegionError,
    PredictionLogits,
)
from .gridio import load_image_png, load_mask_png
from .morphology import (
    boundary_pixels,
    component_sizes,
    connected_components,
    euclidean_distance_transform,
)
from .promptsim import (
    ClickParams,
    ScribbleParams,
    sim_centerline_scribble,
    sim_clicks,
    sim_contour_scribble,
    sim_line_scribble,
)
from .rng import SeededRng

PROTOCOL_NAMES = (
    "center_clicks",
    "random_clicks",
    "warm_start",
    "line_scribbles",
    "centerline_scribbles",
    "contour_scribbles",
)


def dice(a: BinaryMask, b: BinaryMask) -> float:
    """Overlap score 2|a&b| / (|a|+|b|); two empty masks score 1."""
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    inter = float((a.data * b.data).sum())
    denom = a.area + b.area
    if denom == 0:
        return 1.0
    return 2.0 * inter / denom


def _boundary_points(mask: BinaryMask) -> np.ndarray:
    return np.argwhere(boundary_pixels(mask))


def _nearest_distances(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """For each point in src, Euclidean distance to the nearest dst point."""
    d2 = ((src[:, None, :] - dst[None, :, :]) ** 2).sum(axis=2)
    return np.sqrt(d2.min(axis=1).astype(np.float64))


def hd95(a: BinaryMask, b: BinaryMask) -> float | None:
    """95th percentile of pooled boundary-to-boundary nearest distances.

    Both directions are pooled into one multiset, which makes the metric
    symmetric. Returns None (undefined) when either mask is empty.
    """
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    if a.is_empty() or b.is_empty():
        return None
    pa, pb = _boundary_points(a), _boundary_points(b)
    pooled = np.concatenate([_nearest_distances(pa, pb), _nearest_distances(pb, pa)])
    return float(np.percentile(pooled, 95))


@dataclass(frozen=True)
class ProtocolConfig:
    """One evaluation recipe: initial prompts plus per-step corrections."""

    name: str
    steps: int = 5
    seeds: int = 5
    scribble_cap: int | None = None  # None: max image dimension
    min_separation: int = 5

    def __post_init__(self):
        if self.name not in PROTOCOL_NAMES:
            raise ValueError(f"unknown protocol {self.name!r}; choose from {PROTOCOL_NAMES}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")


@dataclass(frozen=True)
class EvalRow:
    dataset: str
    task: str
    example: str
    seed: int
    step: int
    dice: float
    hd95: float | None


@dataclass
class EvalReport:
    protocol: str
    rows: list[EvalRow] = field(default_factory=list)

    def mean_dice_by_step(self) -> dict[int, float]:
        """Dataset-equal weighting: average within dataset, then across."""
        steps = sorted({r.step for r in self.rows})
        out = {}
        for step in steps:
            per_dataset: dict[str, list[float]] = {}
            for r in self.rows:
                if r.step == step:
                    per_dataset.setdefault(r.dataset, []).append(r.dice)
            out[step] = float(np.mean([np.mean(v) for v in per_dataset.values()]))
        return out

    def mean_hd95_by_step(self) -> dict[int, float]:
        steps = sorted({r.step for r in self.rows})
        out = {}
        for step in steps:
            per_dataset: dict[str, list[float]] = {}
            for r in self.rows:
                if r.step == step and r.hd95 is not None:
                    per_dataset.setdefault(r.dataset, []).append(r.hd95)
            if per_dataset:
                out[step] = float(np.mean([np.mean(v) for v in per_dataset.values()]))
        return out

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["dataset", "task", "example", "seed", "step", "dice", "hd95"])
        for r in sorted(self.rows, key=lambda r: (r.dataset, r.task, r.example, r.seed, r.step)):
            writer.writerow(
                [r.dataset, r.task, r.example, r.seed, r.step, f"{r.dice:.6f}",
                 "" if r.hd95 is None else f"{r.hd95:.6f}"]
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_json(self, path: str | Path | None = None) -> str:
        payload = {
            "protocol": self.protocol,
            "mean_dice_by_step": self.mean_dice_by_step(),
            "mean_hd95_by_step": self.mean_hd95_by_step(),
            "rows": [
                {
                    "dataset": r.dataset, "task": r.task, "example": r.example,
                    "seed": r.seed, "step": r.step, "dice": r.dice, "hd95": r.hd95,
                }
                for r in sorted(
                    self.rows, key=lambda r: (r.dataset, r.task, r.example, r.seed, r.step)
                )
            ],
        }
        text = json.dumps(payload, indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def _largest_component_center(mask: BinaryMask) -> tuple[int, int]:
    """EDT-deepest pixel of the largest component (ties: lowest id, scan order)."""
    comps = connected_components(mask, connectivity=8)
    sizes = component_sizes(comps)
    best = int(np.argmax(sizes)) + 1  # argmax takes lowest index on ties
    comp = comps.data == best
    edt = euclidean_distance_transform(BinaryMask(comp))
    r, c = np.unravel_index(int(np.argmax(edt)), edt.shape)
    return int(r), int(c)


def _error_regions_with_sign(
    y: BinaryMask, logits: PredictionLogits
) -> list[tuple[str, BinaryMask]]:
    false_neg, false_pos = compute_error_region(y, logits)
    out = []
    if not false_neg.is_empty():
        out.append(("pos", false_neg))
    if not false_pos.is_empty():
        out.append(("neg", false_pos))
    return out


def _center_correction(y: BinaryMask, logits: PredictionLogits) -> list[Click]:
    """One click at the EDT-center of the largest error component."""
    regions = _error_regions_with_sign(y, logits)
    if not regions:
        return []
    best_sign, best_mask, best_size = None, None, -1
    for sign, mask in regions:
        comps = connected_components(mask, connectivity=8)
        sizes = component_sizes(comps)
        size = int(sizes.max())
        if size > best_size:
            best_sign, best_mask, best_size = sign, mask, size
    r, c = _largest_component_center(best_mask)
    return [Click(r, c, best_sign)]


def _random_correction(y: BinaryMask, logits: PredictionLogits, rng: SeededRng) -> list[Click]:
    """One click uniform over the union of the error regions."""
    false_neg, false_pos = compute_error_region(y, logits)
    pool = []
    for sign, mask in (("pos", false_neg), ("neg", false_pos)):
        for r, c in np.argwhere(mask.as_bool()):
            pool.append((int(r), int(c), sign))
    if not pool:
        return []
    r, c, sign = pool[int(rng.gen.integers(len(pool)))]
    return [Click(r, c, sign)]


class _ProtocolRunner:
    """Initial prompts and per-step corrections for one protocol name."""

    def __init__(self, protocol: ProtocolConfig, shape: tuple[int, int]):
        self.protocol = protocol
        cap = protocol.scribble_cap or max(shape)
        self.scribble_params = ScribbleParams(max_scribble_pixels=cap)
        self.click_params = ClickParams(min_separation=protocol.min_separation)
        self.sim = {
            "line_scribbles": sim_line_scribble,
            "centerline_scribbles": sim_centerline_scribble,
            "contour_scribbles": sim_contour_scribble,
        }.get(protocol.name)

    def initial(self, y: BinaryMask, rng: SeededRng) -> InteractionSet:
        name = self.protocol.name
        background = y.complement()
        if name == "center_clicks":
            r, c = _largest_component_center(y)
            return InteractionSet(clicks=(Click(r, c, "pos"),))
        if name == "random_clicks":
            clicks = sim_clicks(y, "random", 1, rng.derive("init"), self.click_params, "pos")
            return InteractionSet(clicks=tuple(clicks))
        if name == "warm_start":
            pos = sim_clicks(y, "random", 3, rng.derive("wp"), self.click_params, "pos")
            neg = (
                sim_clicks(background, "random", 3, rng.derive("wn"), self.click_params, "neg")
                if not background.is_empty() else []
            )
            return InteractionSet(clicks=tuple(pos + neg))
        n_init = 3 if name == "line_scribbles" else 1
        pos = tuple(
            self.sim(y, rng.derive("sp", i), self.scribble_params, "pos")
            for i in range(n_init)
        )
        neg = tuple(
            self.sim(background, rng.derive("sn", i), self.scribble_params, "neg")
            for i in range(n_init)
            if not background.is_empty()
        )
        return InteractionSet(pos_scribbles=pos, neg_scribbles=neg)

    def correction(
        self, y: BinaryMask, logits: PredictionLogits, rng: SeededRng
    ) -> InteractionSet:
        name = self.protocol.name
        if name in ("center_clicks", "warm_start"):
            return InteractionSet(clicks=tuple(_center_correction(y, logits)))
        if name == "random_clicks":
            return InteractionSet(clicks=tuple(_random_correction(y, logits, rng)))
        regions = _error_regions_with_sign(y, logits)
        if not regions:
            return InteractionSet()
        # one scribble on the larger remaining error region
        sign, mask = max(regions, key=lambda kv: kv[1].area)
        scribble = self.sim(mask, rng.derive("cs"), self.scribble_params, sign)
        if sign == "pos":
            return InteractionSet(pos_scribbles=(scribble,))
        return InteractionSet(neg_scribbles=(scribble,))


def run_protocol_on_example(
    model,
    image: Image2D,
    y: BinaryMask,
    protocol: ProtocolConfig,
    rng: SeededRng,
) -> list[tuple[int, float, float | None]]:
    """(step, dice, hd95) per refinement step for a single example."""
    if y.is_empty():
        raise NoRegionError("protocol label is empty")
    runner = _ProtocolRunner(protocol, y.shape)
    interactions = runner.initial(y, rng.derive("init"))
    prev: PredictionLogits | None = None
    out = []
    for step in range(1, protocol.steps + 1):
        logits = model.predict(image, interactions, prev)
        pred = logits.binarized()
        out.append((step, dice(pred, y), hd95(pred, y)))
        prev = logits
        if step < protocol.steps:
            delta = runner.correction(y, logits, rng.derive("step", step))
            interactions = interactions.merged(delta)
    return out


def _evaluate_example(model, rec, ex, protocol: ProtocolConfig, rng: SeededRng) -> list[EvalRow]:
    image = load_image_png(ex.image_path)
    y = load_mask_png(ex.label_path)
    if y.is_empty():
        return []
    rows = []
    for seed_i in range(protocol.seeds):
        ex_rng = rng.derive(rec.dataset_id, rec.label_id, ex.image_path.stem, seed_i)
        for step, d, h in run_protocol_on_example(model, image, y, protocol, ex_rng):
            rows.append(
                EvalRow(
                    dataset=rec.dataset_id,
                    task=f"{rec.modality_id}/{rec.axis_id}/{rec.label_id}",
                    example=ex.image_path.stem,
                    seed=seed_i,
                    step=step,
                    dice=d,
                    hd95=h,
                )
            )
    return rows


def run_protocol(
    model,
    index: DatasetIndex,
    protocol: ProtocolConfig,
    rng: SeededRng,
    split: str = "test",
    jobs: int = 1,
) -> EvalReport:
    """Evaluate a model over every example of a split, across seeds.

    Examples run independently with derived seeds, so jobs > 1 parallelizes
    across them without changing any result; rows come back sorted."""
    pairs = [
        (rec, ex) for rec in index.records for ex in rec.examples_in(split)
    ]
    if jobs > 1 and len(pairs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(
                lambda pair: _evaluate_example(model, pair[0], pair[1], protocol, rng),
                pairs,
            ))
    else:
        chunks = [_evaluate_example(model, rec, ex, protocol, rng) for rec, ex in pairs]
    rows = [row for chunk in chunks for row in chunk]
    if not rows:
        raise NoRegionError(f"no nonempty examples in split {split!r}")
    rows.sort(key=lambda r: (r.dataset, r.task, r.example, r.seed, r.step))
    return EvalReport(protocol=protocol.name, rows=rows)


def _bench_inputs(rng: SeededRng, side: int, scribble_pixels: int):
    """Random image plus a scribble prompt covering exactly `scribble_pixels`."""
    image = Image2D(rng.gen.uniform(0.0, 1.0, size=(side, side)).astype(np.float32))
    grid = np.zeros((side, side), dtype=np.float32)
    row = side // 2
    count = 0
    r, c = row, side // 8
    while count < scribble_pixels:
        grid[r % side, c % side] = 1.0
        count += 1
        c += 1
        if c >= side:
            c = 0
            r += 1
    from .grids import ScribbleMap

    scribble = ScribbleMap(grid, "pos")
    return image, InteractionSet(pos_scribbles=(scribble,))


def latency_bench(
    model,
    trials: int = 1000,
    side: int = 128,
    scribble_pixels: int = 128,
    seed: int = 0,
    single_thread: bool = True,
) -> tuple[float, float]:
    """Mean and std of seconds per prediction (encode + forward) on one thread."""
    if trials < 10:
        raise ValueError("trials must be >= 10")
    rng = SeededRng(seed)
    image, interactions = _bench_inputs(rng, side, scribble_pixels)
    times = np.empty(trials, dtype=np.float64)

    def run() -> None:
        model.predict(image, interactions, None)

    from threadpoolctl import threadpool_limits

    limit = threadpool_limits(limits=1) if single_thread else None
    try:
        run()  # warmup
        for i in range(trials):
            t0 = time.perf_counter()
            run()
            times[i] = time.perf_counter() - t0
    finally:
        if limit is not None:
            limit.unregister()
    return float(times.mean()), float(times.std())
