"""Binary-mask morphology: thinning, exact distance transform, components."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .grids import BinaryMask, MultiLabelMask

_CONN4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_CONN8 = np.ones((3, 3), dtype=bool)


def _neighbor_rings(padded: np.ndarray, h: int, w: int) -> list[np.ndarray]:
    """The 8 neighbors p2..p9 (N, NE, E, SE, S, SW, W, NW) of every pixel."""
    return [
        padded[0 : h, 1 : w + 1],      # p2 N
        padded[0 : h, 2 : w + 2],      # p3 NE
        padded[1 : h + 1, 2 : w + 2],  # p4 E
        padded[2 : h + 2, 2 : w + 2],  # p5 SE
        padded[2 : h + 2, 1 : w + 1],  # p6 S
        padded[2 : h + 2, 0 : w],      # p7 SW
        padded[1 : h + 1, 0 : w],      # p8 W
        padded[0 : h, 0 : w],          # p9 NW
    ]


def zhang_suen_thin(mask: BinaryMask) -> BinaryMask:
    """Reduce a mask to a 1-pixel-wide skeleton.

    Runs the classic two sub-passes until a full iteration deletes nothing.
    Deletion conditions per pixel p with neighbors p2..p9:
      2 <= B(p) <= 6, A(p) == 1, and the sub-pass specific products
      (p2*p4*p6 == 0 and p4*p6*p8 == 0) or (p2*p4*p8 == 0 and p2*p6*p8 == 0).
    """
    grid = mask.as_bool().astype(np.uint8)
    h, w = grid.shape
    while True:
        changed = False
        for subpass in (0, 1):
            padded = np.zeros((h + 2, w + 2), dtype=np.uint8)
            padded[1 : h + 1, 1 : w + 1] = grid
            n = _neighbor_rings(padded, h, w)
            b = sum(x.astype(np.int32) for x in n)
            ring = n + [n[0]]
            a = sum(
                ((ring[i] == 0) & (ring[i + 1] == 1)).astype(np.int32)
                for i in range(8)
            )
            if subpass == 0:
                cond = (n[0] * n[2] * n[4] == 0) & (n[2] * n[4] * n[6] == 0)
            else:
                cond = (n[0] * n[2] * n[6] == 0) & (n[0] * n[4] * n[6] == 0)
            deletable = (grid == 1) & (b >= 2) & (b <= 6) & (a == 1) & cond
            if deletable.any():
                grid[deletable] = 0
                changed = True
        if not changed:
            break
    return BinaryMask(grid.astype(np.float32))


def _column_distances(background: np.ndarray) -> np.ndarray:
    """Per pixel, distance to the nearest background pixel in its own column."""
    h, w = background.shape
    big = np.float32(h + w + 1)
    d = np.full(w, big, dtype=np.float32)
    down = np.empty((h, w), dtype=np.float32)
    for i in range(h):
        d = np.where(background[i], 0.0, d + 1.0)
        down[i] = d
    d = np.full(w, big, dtype=np.float32)
    for i in range(h - 1, -1, -1):
        d = np.where(background[i], 0.0, d + 1.0)
        np.minimum(down[i], d, out=down[i])
    return down


def euclidean_distance_transform(mask: BinaryMask) -> np.ndarray:
    """Exact Euclidean distance of each foreground pixel to the nearest
    background pixel; zero on background. Out-of-grid counts as background.

    Two phases: exact per-column vertical distances, then per row the exact
    minimum over horizontal offsets of sqrt(dx^2 + vert^2).
    """
    fg = mask.as_bool()
    h, w = fg.shape
    # pad one background ring so the image border acts as background
    bg = np.ones((h + 2, w + 2), dtype=bool)
    bg[1 : h + 1, 1 : w + 1] = ~fg
    vert = _column_distances(bg)
    ph, pw = bg.shape

    offs = np.arange(pw, dtype=np.float32)
    dx2 = (offs[:, None] - offs[None, :]) ** 2  # (pw, pw)
    out = np.empty((ph, pw), dtype=np.float32)
    vert2 = vert * vert
    block = max(1, int(4e6 // (pw * pw)) or 1)
    for start in range(0, ph, block):
        stop = min(ph, start + block)
        # D2[i, j] = min_j' (j - j')^2 + vert[i, j']^2
        cand = dx2[None, :, :] + vert2[start:stop, None, :]
        out[start:stop] = cand.min(axis=2)
    dist = np.sqrt(out[1 : h + 1, 1 : w + 1])
    dist[~fg] = 0.0
    return dist.astype(np.float32)


def connected_components(mask: BinaryMask, connectivity: int = 8) -> MultiLabelMask:
    """Label foreground components 1..C in scan order; 0 is background."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = _CONN4 if connectivity == 4 else _CONN8
    labels, count = ndimage.label(mask.as_bool(), structure=structure)
    return MultiLabelMask(labels.astype(np.int32), num_labels=count + 1)


def component_sizes(components: MultiLabelMask) -> np.ndarray:
    """Pixel counts for ids 1..C (index 0 of the result is component 1)."""
    counts = np.bincount(components.data.reshape(-1), minlength=components.num_labels)
    return counts[1:]


def boundary_pixels(mask: BinaryMask) -> np.ndarray:
    """Foreground pixels with at least one 4-neighbor outside the mask.

    Out-of-grid neighbors count as background, so pixels on the image
    border are boundary pixels.
    """
    fg = mask.as_bool()
    h, w = fg.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1 : h + 1, 1 : w + 1] = fg
    interior = (
        padded[0:h, 1 : w + 1]
        & padded[2 : h + 2, 1 : w + 1]
        & padded[1 : h + 1, 0:w]
        & padded[1 : h + 1, 2 : w + 2]
    )
    return fg & ~interior
