"""Shared grid value types: images, masks, prompts, interaction sets.

All dense grids are float32 numpy arrays in (height, width) row-major
layout. Instances are immutable after construction (backing arrays are
marked read-only) so they can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

Sign = Literal["pos", "neg"]

MIN_IMAGE_SIDE = 8


class NoRegionError(ValueError):
    """An operation required a nonempty region but the region is empty."""


def _as_float_grid(data, name: str) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D grid, got shape {arr.shape}")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    # copy writeable inputs so freezing never mutates caller-owned arrays
    if arr.flags.writeable:
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Image2D:
    """Grayscale image with values on [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_float_grid(self.data, "image")
        if arr.shape[0] < MIN_IMAGE_SIDE or arr.shape[1] < MIN_IMAGE_SIDE:
            raise ValueError(f"image sides must be >= {MIN_IMAGE_SIDE}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(f"image values outside [0,1]: min={arr.min()}, max={arr.max()}")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class BinaryMask:
    """Dense mask with values exactly 0 or 1 (stored float32)."""

    data: np.ndarray

    def __post_init__(self):
        arr = self.data
        if arr.dtype == bool:
            arr = arr.astype(np.float32)
        arr = _as_float_grid(arr, "mask")
        bad = (arr != 0.0) & (arr != 1.0)
        if bad.any():
            raise ValueError(f"mask has {int(bad.sum())} values not in {{0,1}}")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def area(self) -> int:
        return int(self.data.sum())

    def is_empty(self) -> bool:
        return not self.data.any()

    def as_bool(self) -> np.ndarray:
        return self.data > 0.5

    def complement(self) -> "BinaryMask":
        return BinaryMask(1.0 - self.data)


@dataclass(frozen=True)
class MultiLabelMask:
    """Integer label grid; label ids live in [0, num_labels).

    Partition outputs guarantee every id occurs; component maps may omit
    id 0 when there is no background pixel.
    """

    data: np.ndarray
    num_labels: int

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"label grid must be 2-D, got shape {arr.shape}")
        arr = arr.astype(np.int32, copy=False)
        if self.num_labels < 1:
            raise ValueError("num_labels must be >= 1")
        if arr.min() < 0 or arr.max() >= self.num_labels:
            raise ValueError(
                f"label ids must lie in [0,{self.num_labels}), got [{arr.min()},{arr.max()}]"
            )
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def label_mask(self, label: int) -> BinaryMask:
        return BinaryMask(self.data == label)

    def check_complete_partition(self) -> None:
        """Every id in [0, num_labels) must occur at least once."""
        present = np.unique(self.data)
        if len(present) != self.num_labels:
            missing = sorted(set(range(self.num_labels)) - set(present.tolist()))
            raise ValueError(f"partition is missing label ids {missing}")


@dataclass(frozen=True)
class Click:
    """Single signed pixel prompt."""

    row: int
    col: int
    sign: Sign

    def __post_init__(self):
        if self.sign not in ("pos", "neg"):
            raise ValueError(f"click sign must be 'pos' or 'neg', got {self.sign!r}")
        object.__setattr__(self, "row", int(self.row))
        object.__setattr__(self, "col", int(self.col))

    def in_bounds(self, shape: tuple[int, int]) -> bool:
        return 0 <= self.row < shape[0] and 0 <= self.col < shape[1]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box prompt, inclusive pixel coordinates."""

    row_min: int
    col_min: int
    row_max: int
    col_max: int

    def __post_init__(self):
        for name in ("row_min", "col_min", "row_max", "col_max"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.row_min > self.row_max or self.col_min > self.col_max:
            raise ValueError(f"degenerate box {self}")

    def clipped(self, shape: tuple[int, int]) -> "BoundingBox":
        h, w = shape
        return BoundingBox(
            max(0, self.row_min), max(0, self.col_min),
            min(h - 1, self.row_max), min(w - 1, self.col_max),
        )

    def contains_box(self, other: "BoundingBox") -> bool:
        return (
            self.row_min <= other.row_min and self.col_min <= other.col_min
            and self.row_max >= other.row_max and self.col_max >= other.col_max
        )

    def to_mask(self, shape: tuple[int, int]) -> np.ndarray:
        out = np.zeros(shape, dtype=np.float32)
        b = self.clipped(shape)
        out[b.row_min : b.row_max + 1, b.col_min : b.col_max + 1] = 1.0
        return out


def min_bounding_box(mask: BinaryMask) -> BoundingBox:
    """Tightest box enclosing the foreground of mask."""
    if mask.is_empty():
        raise NoRegionError("cannot bound an empty mask")
    rows = np.flatnonzero(mask.data.any(axis=1))
    cols = np.flatnonzero(mask.data.any(axis=0))
    return BoundingBox(int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1]))


@dataclass(frozen=True)
class ScribbleMap:
    """Freehand stroke mask on [0, 1] with a sign."""

    data: np.ndarray
    sign: Sign

    def __post_init__(self):
        arr = _as_float_grid(self.data, "scribble")
        if not np.all(np.isfinite(arr)):
            raise ValueError("scribble contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("scribble values must lie in [0,1]")
        if self.sign not in ("pos", "neg"):
            raise ValueError(f"scribble sign must be 'pos' or 'neg', got {self.sign!r}")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def support(self) -> np.ndarray:
        return self.data > 0.0

    def support_size(self) -> int:
        return int(np.count_nonzero(self.data))


@dataclass(frozen=True)
class InteractionSet:
    """Accumulated user prompts; grows append-only across refinement steps."""

    pos_scribbles: tuple[ScribbleMap, ...] = ()
    neg_scribbles: tuple[ScribbleMap, ...] = ()
    clicks: tuple[Click, ...] = ()
    boxes: tuple[BoundingBox, ...] = ()

    def merged(self, delta: "InteractionSet") -> "InteractionSet":
        """Union of self and delta; self's prompts always remain."""
        return InteractionSet(
            pos_scribbles=self.pos_scribbles + delta.pos_scribbles,
            neg_scribbles=self.neg_scribbles + delta.neg_scribbles,
            clicks=self.clicks + delta.clicks,
            boxes=self.boxes + delta.boxes,
        )

    def is_empty(self) -> bool:
        return not (self.pos_scribbles or self.neg_scribbles or self.clicks or self.boxes)

    def count(self) -> int:
        return (
            len(self.pos_scribbles) + len(self.neg_scribbles)
            + len(self.clicks) + len(self.boxes)
        )

    def contains(self, other: "InteractionSet") -> bool:
        """True when every prompt of other is present here (by identity of content)."""
        def sub(a, b):
            return len(b) <= len(a) and all(x is y or x == y for x, y in zip(a, b))

        def sub_scribbles(a, b):
            if len(b) > len(a):
                return False
            return all(
                x is y or (x.sign == y.sign and np.array_equal(x.data, y.data))
                for x, y in zip(a, b)
            )

        return (
            sub_scribbles(self.pos_scribbles, other.pos_scribbles)
            and sub_scribbles(self.neg_scribbles, other.neg_scribbles)
            and sub(self.clicks, other.clicks)
            and sub(self.boxes, other.boxes)
        )

    def validate_shape(self, shape: tuple[int, int]) -> None:
        for s in self.pos_scribbles + self.neg_scribbles:
            if s.shape != shape:
                raise ValueError(f"scribble shape {s.shape} does not match grid {shape}")
        for c in self.clicks:
            if not c.in_bounds(shape):
                raise ValueError(f"click ({c.row},{c.col}) outside grid {shape}")


@dataclass(frozen=True)
class PredictionLogits:
    """Raw (unbounded) model output, same shape as the input image."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_float_grid(self.data, "logits")
        if not np.all(np.isfinite(arr)):
            raise ValueError("logits contain non-finite values")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def probabilities(self) -> np.ndarray:
        # sigmoid, stable on both tails
        x = self.data
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out

    def binarized(self, threshold: float = 0.5) -> BinaryMask:
        """Strict > on the probability scale."""
        return BinaryMask(self.probabilities() > threshold)
