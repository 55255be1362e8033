"""Deterministic random streams based on the splitmix64 mixer.

All randomized checks in the package draw from :class:`SplitMix64` so that a
seed fully determines every stream, independent of platform or library
version.  The update rule is the standard splitmix64 sequence:

    state <- state + 0x9E3779B97F4A7C15
    z <- state
    z <- (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9
    z <- (z XOR (z >> 27)) * 0x94D049BB133111EB
    output <- z XOR (z >> 31)

with all arithmetic modulo 2^64.  Doubles in [0, 1) take the top 53 bits.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """Seeded splitmix64 generator with labeled substreams."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0 ** -53
        return low + (high - low) * u

    def normal(self) -> float:
        # Box-Muller; one deviate per call keeps the stream layout simple.
        u1 = max(self.uniform(), 2.0 ** -53)
        u2 = self.uniform()
        return float(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))

    def uniform_array(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        out = np.array([self.uniform(low, high) for _ in range(n)])
        return out.reshape(shape)

    def normal_array(self, shape) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        out = np.array([self.normal() for _ in range(n)])
        return out.reshape(shape)

    def substream(self, label: str) -> "SplitMix64":
        """Derive an independent stream from a textual label."""
        h = 0xCBF29CE484222325  # FNV-1a offset basis
        for b in label.encode("utf8"):
            h = ((h ^ b) * 0x100000001B3) & _MASK
        return SplitMix64(_mix((self._state ^ h) & _MASK))
