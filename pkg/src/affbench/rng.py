"""Portable hashing and pseudo-random streams.

Everything here is pure integer arithmetic so results are identical across
platforms and numpy versions.
"""

from __future__ import annotations

from collections.abc import MutableSequence, Sequence
import math

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a_64(data: bytes, seed: int = FNV_OFFSET) -> int:
    h = seed
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def hash_ints(values: Sequence[int]) -> int:
    """FNV-1a over the little-endian 64-bit encoding of ``values``."""
    payload = b"".join((int(v) & MASK64).to_bytes(8, "little") for v in values)
    return fnv1a_64(payload)


def mix64(z: int) -> int:
    """The splitmix64 output finalizer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns ``(new_state, output)``."""
    state = (state + GOLDEN_GAMMA) & MASK64
    return state, mix64(state)


def derive_seed(master: int, *keys: object) -> int:
    """Derive an independent 64-bit stream seed from a master seed and keys.

    Integer keys are mixed directly; anything else is hashed through its
    ``str`` form, so ``derive_seed(s, "forest", 3)`` is stable everywhere.
    """
    state = int(master) & MASK64
    for key in keys:
        if isinstance(key, int) and not isinstance(key, bool):
            k = int(key) & MASK64
        else:
            k = fnv1a_64(str(key).encode("utf-8"))
        state = mix64((state ^ k) + GOLDEN_GAMMA)
    return state


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """xoshiro256** generator seeded through splitmix64."""

    def __init__(self, seed: int):
        state = int(seed) & MASK64
        s = []
        for _ in range(4):
            state, out = splitmix64(state)
            s.append(out)
        if not any(s):
            s[0] = 1
        self._s = s

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def below(self, n: int) -> int:
        """Unbiased integer in ``[0, n)`` (rejection sampling)."""
        if n <= 0:
            raise ValueError(f"upper bound must be positive, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, items: MutableSequence) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def normal(self) -> float:
        # Box-Muller; 1 - u keeps the log argument in (0, 1].
        u1 = 1.0 - self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
