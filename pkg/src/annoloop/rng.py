"""Portable deterministic random numbers.

Every random decision in this package flows through :class:`SplitMix64`, a
tiny, well-known 64-bit generator with a published reference implementation
(Steele, Lea & Flood's mixing function, as used by ``java.util.SplittableRandom``
and as the seeder of the xoshiro family).  It was chosen over platform RNGs so
that shuffles, synthetic detections and whole campaign reports are reproducible
bit-for-bit across machines, Python versions and reimplementations in other
languages.

Derived quantities are defined on top of the raw 64-bit stream as follows:

* ``random()``    -- take the top 53 bits, scale by 2**-53 (float in [0, 1)).
* ``below(n)``    -- unbiased bounded integer by rejection: draw 64-bit words
  until one falls under the largest multiple of ``n``, then reduce mod ``n``.
* ``shuffle(xs)`` -- Fisher-Yates from the last index down, ``j = below(i + 1)``.
* ``uniform(a,b)``-- ``a + (b - a) * random()``.
* ``poisson(lam)``-- Knuth's product-of-uniforms method (fine for small rates).

Sub-seeds for independent roles are split from a master seed by XOR-ing it
with the FNV-1a 64-bit hash of a role string (see :func:`derive_seed`).
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x00000100000001B3


def fnv1a64(text: str) -> int:
    """FNV-1a 64-bit hash of the UTF-8 encoding of ``text``."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def derive_seed(master: int, role: str) -> int:
    """Split a sub-seed out of ``master`` for the named role.

    The rule is ``master XOR fnv1a64(role)``; it is part of the reproducibility
    contract, so reports quote the master seed only.
    """
    return (master ^ fnv1a64(role)) & _MASK64


class SplitMix64:
    """Deterministic 64-bit generator; see the module docstring for the contract."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n)."""
        if n <= 0:
            raise ValueError("below() needs n >= 1")
        limit = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def poisson(self, lam: float) -> int:
        """Poisson draw via Knuth's method; intended for small rates."""
        if lam <= 0.0:
            return 0
        threshold = math.exp(-lam)
        count = 0
        product = self.random()
        while product > threshold:
            count += 1
            product *= self.random()
        return count

    def getstate(self) -> int:
        return self._state

    def setstate(self, state: int) -> None:
        self._state = state & _MASK64
