"""Counter-based random streams.

Every stream is a Philox-4x64 generator keyed by ``(master_seed, stream_index)``.
Distinct keys select distinct bijections of the counter space, so stream
``(s, i)`` never overlaps ``(s, j)`` and any stream can be rebuilt from its
two integers alone.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


class RngStream:
    """Single-owner source of Gaussian increments for one path or ensemble."""

    def __init__(self, master_seed: int, stream_index: int):
        if master_seed < 0 or stream_index < 0:
            raise ValueError("seed and stream index must be non-negative")
        self.master_seed = int(master_seed) & _MASK64
        self.stream_index = int(stream_index) & _MASK64
        key = self.master_seed | (self.stream_index << 64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normals(self, n: int, dim: int = 2) -> np.ndarray:
        """``(n, dim)`` array of independent standard normals."""
        return self._gen.standard_normal((n, dim))

    def uniform(self, size=None):
        return self._gen.random(size)

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_index={self.stream_index})"


def make_rng_stream(master_seed: int, stream_index: int) -> RngStream:
    return RngStream(master_seed, stream_index)
