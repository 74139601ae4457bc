"""Small deterministic generator so sampled mutations are reproducible anywhere.

xorshift64* (Vigna 2014), state seeded through one splitmix64 step:

    state = splitmix64(seed) or 0x9E3779B97F4A7C15
    next():  x ^= x >> 12; x ^= x << 25; x ^= x >> 27   (64-bit)
             return (x * 0x2545F4914F6CDD1D) mod 2**64
    below(n): draw r until r < 2**64 - (2**64 mod n); return r mod n
"""
from __future__ import annotations

from typing import List, Sequence, TypeVar

T = TypeVar("T")

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class XorShift64Star:
    def __init__(self, seed: int) -> None:
        self.state = splitmix64(seed & MASK64) or 0x9E3779B97F4A7C15

    def next(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next()
            if r < limit:
                return r % n

    def sample(self, population: Sequence[T], k: int) -> List[T]:
        """k distinct items by partial Fisher-Yates, in draw order."""
        pool = list(population)
        k = min(k, len(pool))
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
