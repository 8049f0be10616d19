"""Grid file formats.

SPG1: raw float grids. Layout: magic b"SPG1", u32 LE height, u32 width,
u32 channels, then channels*h*w little-endian float32 values row-major.

PNG: 8-bit grayscale; [0,255] maps to [0,1] for images. Mask PNGs must
contain only {0, 255}. Color inputs are converted to grayscale.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .grids import BinaryMask, Image2D, MultiLabelMask

SPG1_MAGIC = b"SPG1"
_HEADER = struct.Struct("<4sIII")


def spg1_dumps(grid: np.ndarray) -> bytes:
    """Serialize a (h,w) or (c,h,w) float grid."""
    arr = np.asarray(grid, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"SPG1 grids must be 2-D or 3-D, got shape {arr.shape}")
    c, h, w = arr.shape
    header = _HEADER.pack(SPG1_MAGIC, h, w, c)
    return header + arr.astype("<f4", copy=False).tobytes(order="C")


def spg1_loads(blob: bytes) -> np.ndarray:
    """Parse SPG1 bytes into a (c, h, w) float32 array."""
    if len(blob) < _HEADER.size:
        raise ValueError(f"SPG1 blob too short: {len(blob)} bytes")
    magic, h, w, c = _HEADER.unpack_from(blob)
    if magic != SPG1_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {SPG1_MAGIC!r}")
    expected = _HEADER.size + 4 * c * h * w
    if len(blob) != expected:
        raise ValueError(f"SPG1 payload length {len(blob)} != expected {expected}")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    return data.reshape(c, h, w).astype(np.float32, copy=True)


def write_spg1(path: str | Path, grid: np.ndarray) -> None:
    Path(path).write_bytes(spg1_dumps(grid))


def read_spg1(path: str | Path) -> np.ndarray:
    return spg1_loads(Path(path).read_bytes())


def _open_gray(source) -> np.ndarray:
    if isinstance(source, (bytes, bytearray)):
        img = PILImage.open(io.BytesIO(source))
    else:
        img = PILImage.open(source)
    return np.asarray(img.convert("L"), dtype=np.uint8)


def load_image_png(source) -> Image2D:
    """Read a PNG (path or bytes) as a grayscale image on [0,1]."""
    arr = _open_gray(source)
    return Image2D(arr.astype(np.float32) / 255.0)


def load_mask_png(source) -> BinaryMask:
    """Read a PNG whose pixels must all be 0 or 255."""
    arr = _open_gray(source)
    bad = (arr != 0) & (arr != 255)
    if bad.any():
        vals = sorted(np.unique(arr[bad]).tolist())[:8]
        raise ValueError(f"mask PNG has non-binary values (e.g. {vals}); expected only 0 and 255")
    return BinaryMask(arr == 255)


def image_to_png_bytes(grid: np.ndarray) -> bytes:
    """Encode a [0,1] grid as an 8-bit grayscale PNG."""
    arr = np.asarray(grid, dtype=np.float32)
    raw = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    PILImage.fromarray(raw, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def mask_to_png_bytes(mask: BinaryMask | np.ndarray) -> bytes:
    arr = mask.data if isinstance(mask, BinaryMask) else np.asarray(mask)
    raw = np.where(arr > 0.5, 255, 0).astype(np.uint8)
    buf = io.BytesIO()
    PILImage.fromarray(raw, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def save_image_png(path: str | Path, grid: np.ndarray) -> None:
    Path(path).write_bytes(image_to_png_bytes(grid))


def save_mask_png(path: str | Path, mask: BinaryMask | np.ndarray) -> None:
    Path(path).write_bytes(mask_to_png_bytes(mask))


def clicks_to_json(clicks) -> str:
    """Click list wire format: [{"row": int, "col": int, "sign": "pos"|"neg"}]."""
    import json

    return json.dumps(
        [{"row": c.row, "col": c.col, "sign": c.sign} for c in clicks], indent=2
    )


def clicks_from_json(text: str):
    import json

    from .grids import Click

    items = json.loads(text)
    if not isinstance(items, list):
        raise ValueError("click JSON must be a list")
    return [Click(int(i["row"]), int(i["col"]), i["sign"]) for i in items]


def save_labels_png(path: str | Path, labels: MultiLabelMask) -> None:
    """Write a label map as an indexed-palette PNG (distinct color per id)."""
    if labels.num_labels > 256:
        raise ValueError(f"cannot index {labels.num_labels} labels in 8-bit palette PNG")
    img = PILImage.fromarray(labels.data.astype(np.uint8), mode="P")
    rng = np.random.Generator(np.random.PCG64(12))  # fixed palette, background black
    palette = rng.integers(40, 255, size=(256, 3), dtype=np.uint8)
    palette[0] = 0
    img.putpalette(palette.reshape(-1).tolist())
    img.save(Path(path), format="PNG")
