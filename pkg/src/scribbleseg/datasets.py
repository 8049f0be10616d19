"""Desk-scale dataset handling.

Directory layout: root/<dataset>/<label>/{images,labels}/<subject>_<slice>.png
with an optional root/manifest.ini declaring per-dataset modality/axis ids.
Subjects are split 60/20/20 into train/val/test by a stable hash, so the
split is deterministic and disjoint by subject.
"""

from __future__ import annotations

import configparser
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .filters import gaussian_blur
from .grids import BinaryMask, Image2D, NoRegionError
from .gridio import load_image_png, load_mask_png, save_image_png, save_mask_png
from .morphology import connected_components, component_sizes
from .rng import SeededRng

SPLITS = ("train", "val", "test")
TOY_FAMILIES = ("disk", "rect", "ring", "blob")


@dataclass(frozen=True)
class ExampleRef:
    image_path: Path
    label_path: Path
    subject: str
    slice_id: str
    split: str


@dataclass(frozen=True)
class TaskRecord:
    dataset_id: str
    modality_id: str
    axis_id: str
    label_id: str
    examples: tuple[ExampleRef, ...]

    def examples_in(self, split: str) -> tuple[ExampleRef, ...]:
        return tuple(e for e in self.examples if e.split == split)


@dataclass(frozen=True)
class DatasetIndex:
    root: Path
    records: tuple[TaskRecord, ...]

    def datasets(self) -> tuple[str, ...]:
        return tuple(sorted({r.dataset_id for r in self.records}))

    def is_empty(self) -> bool:
        return not self.records

    def count_examples(self, split: str | None = None) -> int:
        return sum(
            len(r.examples) if split is None else len(r.examples_in(split))
            for r in self.records
        )


def assign_splits(dataset_id: str, subjects: set[str]) -> dict[str, str]:
    """Deterministic 60/20/20 split of a dataset's subjects.

    Subjects are ranked by a stable hash and cut at exact proportions, so
    splits stay disjoint by subject and balanced even for tiny datasets.
    """
    ranked = sorted(
        subjects, key=lambda s: (zlib.crc32(f"{dataset_id}:{s}".encode("utf-8")), s)
    )
    n = len(ranked)
    n_train = max(1, round(0.6 * n)) if n else 0
    n_val = round(0.2 * n)
    out = {}
    for i, subject in enumerate(ranked):
        if i < n_train:
            out[subject] = "train"
        elif i < n_train + n_val:
            out[subject] = "val"
        else:
            out[subject] = "test"
    return out


def _read_manifest(root: Path) -> dict[str, dict[str, str]]:
    manifest = root / "manifest.ini"
    if not manifest.exists():
        return {}
    parser = configparser.ConfigParser()
    parser.read(manifest)
    out: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        for key in parser[section]:
            if key not in ("modality", "axis"):
                raise ValueError(f"manifest section [{section}] has unknown key {key!r}")
        out[section] = dict(parser[section])
    return out


def _png_size(path: Path) -> tuple[int, int]:
    with PILImage.open(path) as img:
        w, h = img.size
    return h, w


def load_index(root: str | Path) -> DatasetIndex:
    """Scan the directory layout into a validated, deterministically ordered index."""
    root = Path(root)
    manifest = _read_manifest(root) if root.exists() else {}
    records: list[TaskRecord] = []
    if not root.exists():
        return DatasetIndex(root=root, records=())
    for ds_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        meta = manifest.get(ds_dir.name, {})
        modality = meta.get("modality", "default")
        axis = meta.get("axis", "ax0")
        subjects = {
            p.stem.partition("_")[0]
            for label_dir in ds_dir.iterdir() if label_dir.is_dir()
            for p in (label_dir / "images").glob("*.png")
            if (label_dir / "images").is_dir()
        }
        splits = assign_splits(ds_dir.name, subjects)
        for label_dir in sorted(p for p in ds_dir.iterdir() if p.is_dir()):
            img_dir = label_dir / "images"
            lab_dir = label_dir / "labels"
            if not img_dir.is_dir() or not lab_dir.is_dir():
                continue
            examples = []
            for img_path in sorted(img_dir.glob("*.png")):
                lab_path = lab_dir / img_path.name
                if not lab_path.exists():
                    raise ValueError(f"missing label for image {img_path}")
                ishape, lshape = _png_size(img_path), _png_size(lab_path)
                if ishape != lshape:
                    raise ValueError(
                        f"shape mismatch: {img_path} is {ishape} but {lab_path} is {lshape}"
                    )
                stem = img_path.stem
                subject, _, slice_id = stem.partition("_")
                examples.append(
                    ExampleRef(
                        image_path=img_path,
                        label_path=lab_path,
                        subject=subject,
                        slice_id=slice_id or "0",
                        split=splits[subject],
                    )
                )
            if examples:
                records.append(
                    TaskRecord(
                        dataset_id=ds_dir.name,
                        modality_id=modality,
                        axis_id=axis,
                        label_id=label_dir.name,
                        examples=tuple(examples),
                    )
                )
    return DatasetIndex(root=root, records=tuple(records))


def validate_index(index: DatasetIndex) -> int:
    """Fully load every example; raises with the offending path on failure."""
    n = 0
    for rec in index.records:
        for ex in rec.examples:
            try:
                img = load_image_png(ex.image_path)
            except Exception as err:
                raise ValueError(f"cannot read image {ex.image_path}: {err}") from err
            try:
                lab = load_mask_png(ex.label_path)
            except Exception as err:
                raise ValueError(f"cannot read label {ex.label_path}: {err}") from err
            if img.shape != lab.shape:
                raise ValueError(
                    f"shape mismatch between {ex.image_path} and {ex.label_path}"
                )
            n += 1
    return n


def sample_example(
    index: DatasetIndex, rng: SeededRng, split: str = "train"
) -> tuple[TaskRecord, ExampleRef]:
    """Hierarchical draw: dataset, then modality/axis bucket, then label,
    then example. Balances datasets regardless of their size."""
    by_dataset: dict[str, list[TaskRecord]] = {}
    for rec in index.records:
        if rec.examples_in(split):
            by_dataset.setdefault(rec.dataset_id, []).append(rec)
    if not by_dataset:
        raise NoRegionError(f"index has no examples in split {split!r}")
    ds_ids = sorted(by_dataset)
    ds = ds_ids[int(rng.gen.integers(len(ds_ids)))]
    recs = by_dataset[ds]
    buckets = sorted({(r.modality_id, r.axis_id) for r in recs})
    bucket = buckets[int(rng.gen.integers(len(buckets)))]
    labels = sorted(
        {r.label_id for r in recs if (r.modality_id, r.axis_id) == bucket}
    )
    label = labels[int(rng.gen.integers(len(labels)))]
    rec = next(
        r for r in recs if (r.modality_id, r.axis_id) == bucket and r.label_id == label
    )
    pool = rec.examples_in(split)
    ex = pool[int(rng.gen.integers(len(pool)))]
    return rec, ex


def sample_task(
    index: DatasetIndex, rng: SeededRng, split: str = "train"
) -> tuple[Image2D, BinaryMask]:
    """Hierarchically sample and load one (image, label) pair."""
    _, ex = sample_example(index, rng, split)
    return load_image_png(ex.image_path), load_mask_png(ex.label_path)


@dataclass(frozen=True)
class ToyDatasetSpec:
    """Synthetic shapes stand-in for a real corpus.

    Images carry up to `distractors` extra shapes at the same intensity as
    the labeled one, so intensity alone cannot identify the target and the
    prompts have to disambiguate."""

    families: tuple[str, ...] = ("disk", "ring")
    count: int = 20
    size: int = 64
    noise: float = 0.05
    contrast: tuple[float, float] = (0.2, 0.45)
    blur_sigma: float = 0.6
    distractors: int = 2
    distractor_area_frac: float = 1.0

    def __post_init__(self):
        for f in self.families:
            if f not in TOY_FAMILIES:
                raise ValueError(f"unknown shape family {f!r}")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.size < 16:
            raise ValueError("size must be >= 16")
        if self.distractors < 0:
            raise ValueError("distractors must be >= 0")
        if self.distractor_area_frac <= 0:
            raise ValueError("distractor_area_frac must be > 0")


def _toy_mask(family: str, size: int, rng: SeededRng) -> np.ndarray:
    s = size
    yy, xx = np.mgrid[:s, :s]
    if family == "disk":
        cy, cx = rng.gen.uniform(0.3 * s, 0.7 * s, size=2)
        r = rng.gen.uniform(0.12 * s, 0.3 * s)
        return ((yy - cy) ** 2 + (xx - cx) ** 2) <= r * r
    if family == "rect":
        r0, c0 = rng.gen.uniform(0.1 * s, 0.5 * s, size=2)
        rh = rng.gen.uniform(0.15 * s, 0.4 * s)
        rw = rng.gen.uniform(0.15 * s, 0.4 * s)
        return (yy >= r0) & (yy <= min(r0 + rh, 0.9 * s)) & (xx >= c0) & (xx <= min(c0 + rw, 0.9 * s))
    if family == "ring":
        cy, cx = rng.gen.uniform(0.35 * s, 0.65 * s, size=2)
        r = rng.gen.uniform(0.18 * s, 0.32 * s)
        hole = max(2.0, r * rng.gen.uniform(0.35, 0.6))
        d2 = (yy - cy) ** 2 + (xx - cx) ** 2
        return (d2 <= r * r) & (d2 >= hole * hole)
    if family == "blob":
        noise = rng.gen.normal(size=(s, s)).astype(np.float32)
        smooth = gaussian_blur(noise, s / 10.0)
        level = np.quantile(smooth, float(rng.gen.uniform(0.7, 0.85)))
        mask = smooth >= level
        comps = connected_components(BinaryMask(mask), 8)
        if comps.num_labels <= 1:
            return np.zeros((s, s), dtype=bool)
        sizes = component_sizes(comps)
        return comps.data == (int(np.argmax(sizes)) + 1)
    raise ValueError(f"unknown shape family {family!r}")


def _toy_image(mask: np.ndarray, spec: ToyDatasetSpec, rng: SeededRng) -> np.ndarray:
    bg = float(rng.gen.uniform(0.15, 0.45))
    contrast = float(rng.gen.uniform(*spec.contrast))
    bright = mask.copy()
    if spec.distractors > 0:
        n = int(rng.gen.integers(1, spec.distractors + 1))
        area_cap = max(int(mask.sum() * spec.distractor_area_frac), 16)
        placed = 0
        for attempt in range(8 * n):
            if placed >= n:
                break
            family = spec.families[int(rng.gen.integers(len(spec.families)))]
            shape = _toy_mask(family, mask.shape[0], rng.derive("distract", attempt))
            shape = shape & ~mask  # distractors never touch the labeled shape
            if 9 <= shape.sum() <= area_cap:
                bright |= shape
                placed += 1
    img = np.where(bright, bg + contrast, bg).astype(np.float32)
    ramp = float(rng.gen.uniform(-0.05, 0.05))
    img = img + ramp * np.linspace(-1, 1, mask.shape[1], dtype=np.float32)[None, :]
    img = gaussian_blur(img, spec.blur_sigma, mode="reflect")
    img = img + rng.gen.normal(0.0, spec.noise, size=mask.shape).astype(np.float32)
    return np.clip(img, 0.0, 1.0)


def generate_toy_dataset(
    spec: ToyDatasetSpec, rng: SeededRng, out: str | Path
) -> DatasetIndex:
    """Write a synthetic shapes dataset in the directory layout and index it."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    per_family = [
        spec.count // len(spec.families) + (1 if i < spec.count % len(spec.families) else 0)
        for i in range(len(spec.families))
    ]
    for family, n in zip(spec.families, per_family):
        img_dir = out / family / family / "images"
        lab_dir = out / family / family / "labels"
        img_dir.mkdir(parents=True, exist_ok=True)
        lab_dir.mkdir(parents=True, exist_ok=True)
        for j in range(n):
            sub = rng.derive(family, j)
            mask = _toy_mask(family, spec.size, sub.derive("mask"))
            for retry in range(16):
                if mask.sum() >= max(9, 0.005 * spec.size**2):
                    break
                mask = _toy_mask(family, spec.size, sub.derive("mask", retry))
            else:
                raise NoRegionError(f"could not draw a nonempty {family} mask")
            img = _toy_image(mask, spec, sub.derive("img"))
            name = f"s{j:03d}_0.png"
            save_image_png(img_dir / name, img)
            save_mask_png(lab_dir / name, BinaryMask(mask))
    return load_index(out)
