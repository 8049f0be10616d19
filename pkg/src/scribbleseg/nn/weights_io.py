"""Portable weight file format.

SPWT layout: magic b"SPWT", u32 LE version (1), u32 tensor count, then per
tensor: u16 name length, UTF-8 name, u8 rank, u32 dims, float32 LE payload.
A trailing u32 CRC32 covers all payload bytes in file order.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .unet import UNetWeights

SPWT_MAGIC = b"SPWT"
SPWT_VERSION = 1


def weights_to_bytes(weights: UNetWeights) -> bytes:
    parts = [SPWT_MAGIC, struct.pack("<II", SPWT_VERSION, len(weights.tensors))]
    crc = 0
    for name in sorted(weights.tensors):
        arr = np.ascontiguousarray(weights.tensors[name], dtype="<f4")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        payload = arr.tobytes(order="C")
        crc = zlib.crc32(payload, crc)
        parts.append(payload)
    parts.append(struct.pack("<I", crc))
    return b"".join(parts)


def weights_from_bytes(blob: bytes) -> UNetWeights:
    view = memoryview(blob)
    if len(view) < 12:
        raise ValueError(f"SPWT blob too short: {len(view)} bytes")
    if bytes(view[:4]) != SPWT_MAGIC:
        raise ValueError(f"bad magic {bytes(view[:4])!r}, expected {SPWT_MAGIC!r}")
    version, count = struct.unpack_from("<II", view, 4)
    if version != SPWT_VERSION:
        raise ValueError(f"unsupported SPWT version {version}, expected {SPWT_VERSION}")
    offset = 12
    tensors: dict[str, np.ndarray] = {}
    crc = 0
    for i in range(count):
        try:
            (name_len,) = struct.unpack_from("<H", view, offset)
            offset += 2
            name = bytes(view[offset : offset + name_len]).decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", view, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", view, offset)
            offset += 4 * rank
            n_bytes = 4 * int(np.prod(dims)) if rank else 4
            end = offset + n_bytes
            if end > len(view) - 4:
                raise ValueError(
                    f"tensor {name!r} needs bytes [{offset},{end}) but file has "
                    f"{len(view) - 4} payload bytes"
                )
            payload = bytes(view[offset:end])
            crc = zlib.crc32(payload, crc)
            tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
            offset = end
        except struct.error as err:
            raise ValueError(f"truncated SPWT file while reading tensor {i}: {err}") from err
    if offset + 4 != len(view):
        raise ValueError(
            f"SPWT length mismatch: expected {offset + 4} bytes total, file has {len(view)}"
        )
    (expected_crc,) = struct.unpack_from("<I", view, offset)
    if crc != expected_crc:
        raise ValueError(f"SPWT payload CRC {crc:#010x} != stored {expected_crc:#010x}")
    return UNetWeights(tensors)


def save_weights(path: str | Path, weights: UNetWeights) -> None:
    Path(path).write_bytes(weights_to_bytes(weights))


def load_weights(path: str | Path) -> UNetWeights:
    return weights_from_bytes(Path(path).read_bytes())


def weights_crc(path: str | Path) -> int:
    """The stored payload CRC32 of a weight file (validates the file)."""
    blob = Path(path).read_bytes()
    weights_from_bytes(blob)
    return struct.unpack("<I", blob[-4:])[0]
