"""Deterministic random streams with hierarchical derivation."""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"rng derivation keys must be int or str, got {type(key).__name__}")


class SeededRng:
    """Seeded random stream; identical seed gives identical draws on any platform.

    Child streams are derived from (seed, path) so parallel consumers can
    each get an independent, reproducible stream: rng.derive("episode", 7).
    """

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = _path
        self.gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=[self.seed & 0xFFFFFFFFFFFFFFFF, *_path]))
        )

    def derive(self, *keys) -> "SeededRng":
        """Return an independent stream keyed by (seed, existing path, keys)."""
        return SeededRng(self.seed, self.path + tuple(_key_to_int(k) for k in keys))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, path={self.path})"
