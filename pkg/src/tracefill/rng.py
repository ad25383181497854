"""Deterministic pseudo-random numbers for reproducible experiments.

Uses the public xoshiro256** algorithm (Blackman & Vigna) with splitmix64
seed expansion, implemented directly so the bit stream never depends on a
library version. Doubles are produced from the top 53 bits of each 64-bit
output, giving uniforms in [0, 1).
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256:
    """xoshiro256** generator; same seed always yields the same stream."""

    def __init__(self, seed: int):
        state = seed & _MASK64
        s = []
        for _ in range(4):
            state, word = _splitmix64(state)
            s.append(word)
        self._s = s

    def next_uint64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """One double, uniform in [0, 1)."""
        return (self.next_uint64() >> 11) * 2.0**-53

    def uniform(self, low: float, high: float, size=None):
        """Uniform draw(s) in [low, high); arrays fill in row-major order."""
        if size is None:
            return low + (high - low) * self.random()
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = 1
        for d in shape:
            n *= d
        vals = np.array([self.random() for _ in range(n)], dtype=np.float64)
        return (low + (high - low) * vals).reshape(shape)
