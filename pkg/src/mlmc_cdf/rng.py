"""Counter-based random streams addressed by (seed, path, level, sample index).

Each sample owns a fixed slice of a Philox stream, so the numbers it sees do
not depend on batch sizes, chunking or thread count.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

__all__ = ["CounterRNG"]

_TWO_M53 = 2.0**-53


class CounterRNG:
    """Deterministic random numbers for sample ``i`` of ``level``.

    ``spawn`` derives independent child streams (per run, per experiment)
    through :class:`numpy.random.SeedSequence` spawn keys.
    """

    def __init__(self, seed: int = 0, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        self._keys: dict[int, np.ndarray] = {}

    def spawn(self, *key: int) -> "CounterRNG":
        return CounterRNG(self.seed, self.path + tuple(key))

    def _key(self, level: int) -> np.ndarray:
        key = self._keys.get(level)
        if key is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.path + (int(level),))
            key = ss.generate_state(2, np.uint64)
            self._keys[level] = key
        return key

    def raw(self, level: int, start: int, count: int, width: int) -> np.ndarray:
        """uint64 block of shape ``(count, width)`` for samples ``start..start+count-1``."""
        stride = -(-width // 4) * 4
        counter = np.zeros(4, dtype=np.uint64)
        counter[0] = (start * stride) // 4
        bitgen = np.random.Philox(key=self._key(level), counter=counter)
        return bitgen.random_raw(count * stride).reshape(count, stride)[:, :width]

    def uniforms(self, level: int, start: int, count: int, width: int) -> np.ndarray:
        """Doubles in the open interval (0, 1)."""
        bits = self.raw(level, start, count, width) >> np.uint64(11)
        return (bits.astype(np.float64) + 0.5) * _TWO_M53

    def normals(self, level: int, start: int, count: int, width: int) -> np.ndarray:
        return ndtri(self.uniforms(level, start, count, width))

    def __repr__(self) -> str:
        return f"CounterRNG(seed={self.seed}, path={self.path})"
