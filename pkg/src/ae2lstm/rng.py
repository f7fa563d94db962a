"""Seedable SplitMix64 generator.

SplitMix64 (Steele, Lea & Flood 2014) keeps a single 64-bit counter that is
advanced by the golden-ratio increment ``0x9E3779B97F4A7C15``; each output is
the counter passed through a fixed avalanche mix::

    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    out = z ^ (z >> 31)

All arithmetic is modulo 2**64, so the stream depends only on the seed and is
identical on every platform. Because the state is a plain counter, ``n`` draws
can be produced at once with vectorized uint64 arithmetic.

Derived distributions:

* ``uniform``: top 53 bits of an output scaled by 2**-53, in [0, 1).
* ``normal``: Box-Muller on pairs of uniforms.
* ``permutation``: stable argsort of fresh uniforms.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class Rng:
    def __init__(self, seed: int = 0):
        self.seed = int(seed) & _MASK
        self._state = self.seed

    def next_u64(self, n: int | None = None):
        if n is None:
            return int(self.next_u64(1)[0])
        steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        out = _mix(steps + np.uint64(self._state))
        self._state = (self._state + n * _GAMMA) & _MASK
        return out

    def spawn(self) -> "Rng":
        """Independent child stream seeded from the next output."""
        return Rng(self.next_u64())

    def uniform(self, low=0.0, high=1.0, size=None):
        shape = () if size is None else size
        n = int(np.prod(shape, dtype=np.int64))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        u = low + (high - low) * u
        return float(u[0]) if size is None else u.reshape(shape)

    def normal(self, loc=0.0, scale=1.0, size=None):
        shape = () if size is None else size
        n = int(np.prod(shape, dtype=np.int64))
        m = (n + 1) // 2
        u1 = 1.0 - self.uniform(size=m)  # (0, 1], keeps log finite
        u2 = self.uniform(size=m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:n]
        z = loc + scale * z
        return float(z[0]) if size is None else z.reshape(shape)

    def integers(self, low: int, high: int, size=None):
        """Draws from [low, high); modulo bias is below 2**-53 per draw."""
        u = self.uniform(size=size)
        if size is None:
            return low + int(u * (high - low))
        return low + np.floor(u * (high - low)).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(size=n), kind="stable")

    def shuffle(self, items: list) -> list:
        return [items[i] for i in self.permutation(len(items))]
