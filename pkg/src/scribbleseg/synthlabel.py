"""Synthetic training labels from a graph-based superpixel partition.

The partition follows the classic efficient graph segmentation: edges of
the 4-connected pixel grid are sorted by absolute intensity difference
and merged when the weight is below both components' internal difference
plus a scale-dependent slack tau(C) = scale / |C|. Components smaller
than min_component_size are then merged into a neighboring component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filters import gaussian_blur
from .grids import BinaryMask, Image2D, MultiLabelMask
from .rng import SeededRng


@dataclass(frozen=True)
class SynthConfig:
    synth_prob: float = 0.5
    scale_max: float = 500.0
    min_component_size: int = 20
    pre_blur_sigma: float = 0.8

    def __post_init__(self):
        if not 0.0 <= self.synth_prob <= 1.0:
            raise ValueError("synth_prob must lie in [0,1]")
        if self.scale_max < 1.0:
            raise ValueError("scale_max must be >= 1")
        if self.min_component_size < 1:
            raise ValueError("min_component_size must be >= 1")


class _UnionFind:
    __slots__ = ("parent", "size", "internal")

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)
        self.internal = np.zeros(n, dtype=np.float64)  # max edge weight inside component

    def find(self, a: int) -> int:
        parent = self.parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(self, a: int, b: int, weight: float) -> int:
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        self.internal[a] = max(self.internal[a], self.internal[b], weight)
        return a


def _grid_edges(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Horizontal+vertical neighbor edges with |intensity difference| weights."""
    h, w = values.shape
    idx = np.arange(h * w).reshape(h, w)
    a = np.concatenate([idx[:, :-1].reshape(-1), idx[:-1, :].reshape(-1)])
    b = np.concatenate([idx[:, 1:].reshape(-1), idx[1:, :].reshape(-1)])
    wgt = np.abs(values.reshape(-1)[a] - values.reshape(-1)[b]).astype(np.float64)
    return a, b, wgt


def felzenszwalb_partition(
    image: Image2D,
    scale: float,
    rng: SeededRng | None = None,
    pre_blur_sigma: float = 0.8,
    min_component_size: int = 20,
) -> MultiLabelMask:
    """Partition the image into superpixels; larger scale merges more.

    Deterministic: edges are sorted stably, so rng is accepted only for
    interface symmetry with the samplers and never drawn from.
    """
    if scale < 1.0:
        raise ValueError("scale must be >= 1")
    values = gaussian_blur(image.data, pre_blur_sigma, mode="reflect").astype(np.float64)
    h, w = values.shape
    a, b, wgt = _grid_edges(values)
    order = np.argsort(wgt, kind="stable")
    a, b, wgt = a[order], b[order], wgt[order]

    uf = _UnionFind(h * w)
    size, internal = uf.size, uf.internal
    for i in range(len(wgt)):
        ra, rb = uf.find(int(a[i])), uf.find(int(b[i]))
        if ra == rb:
            continue
        weight = wgt[i]
        if weight <= internal[ra] + scale / size[ra] and weight <= internal[rb] + scale / size[rb]:
            uf.union(ra, rb, weight)

    # post-merge: absorb too-small components along the cheapest edges first
    for i in range(len(wgt)):
        ra, rb = uf.find(int(a[i])), uf.find(int(b[i]))
        if ra != rb and (size[ra] < min_component_size or size[rb] < min_component_size):
            uf.union(ra, rb, wgt[i])

    roots = np.array([uf.find(i) for i in range(h * w)], dtype=np.int64)
    _, labels = np.unique(roots, return_inverse=True)
    out = MultiLabelMask(labels.reshape(h, w).astype(np.int32), num_labels=int(labels.max()) + 1)
    out.check_complete_partition()
    return out


def sample_synthetic_label(image: Image2D, rng: SeededRng, config: SynthConfig) -> BinaryMask:
    """Draw a scale, partition, and return one uniformly chosen superpixel."""
    scale = float(rng.gen.uniform(1.0, config.scale_max))
    partition = felzenszwalb_partition(
        image,
        scale,
        pre_blur_sigma=config.pre_blur_sigma,
        min_component_size=config.min_component_size,
    )
    pick = int(rng.gen.integers(partition.num_labels))
    return partition.label_mask(pick)


def maybe_replace_label(
    image: Image2D, y0: BinaryMask, rng: SeededRng, config: SynthConfig
) -> BinaryMask:
    """With probability synth_prob, swap the real label for a synthetic one.

    Callers can detect the swap via identity: the result is y0 itself when
    no replacement happened."""
    if float(rng.gen.uniform()) < config.synth_prob:
        return sample_synthetic_label(image, rng, config)
    return y0
