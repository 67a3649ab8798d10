"""Portable, splittable pseudo-random numbers.

Raw 64-bit words come from the Philox4x64 counter-based generator keyed by
``(seed, stream)``. The conversion to doubles is done here rather than through
``numpy.random.Generator`` so the streams stay fixed across numpy releases.
"""

from __future__ import annotations

import numpy as np

_TWO_M53 = 2.0**-53


class PortableRng:
    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or stream < 0:
            raise ValueError("seed and stream must be nonnegative")
        self.seed = int(seed)
        self.stream = int(stream)
        self._bits = np.random.Philox(key=[self.seed & (2**64 - 1), self.stream & (2**64 - 1)])

    def split(self, stream: int) -> PortableRng:
        """Independent child generator; depends only on ``(seed, stream)``."""
        return PortableRng(self.seed, (self.stream << 16) + 1 + stream)

    def open01(self, size) -> np.ndarray:
        """Uniform doubles in the open interval (0, 1)."""
        raw = self._bits.random_raw(size)
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53

    def uniform(self, size, low=0.0, high=1.0) -> np.ndarray:
        return low + (high - low) * self.open01(size)

    def integers(self, size, n: int) -> np.ndarray:
        """Integers in ``[0, n)``; bias is below ``n / 2**53``."""
        out = np.floor(self.open01(size) * n).astype(np.int64)
        return np.minimum(out, n - 1)
