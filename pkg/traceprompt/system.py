"""system
Deterministic random streams and seed derivation for traceprompt.

Every random choice in the pipeline (trace sampling, trace dropout) is
drawn from a splitmix64 stream so results reproduce across runs,
platforms and worker counts.

SplitMix64
    A splitmix64 generator

deriveSeed(seed, *parts)
    Mixes a base seed with further integers into a child seed

nameHash(text)
    A stable 64-bit hash of a string
"""

import hashlib

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """The splitmix64 output function."""
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """A splitmix64 pseudo-random generator.

    Methods
    -------
    next()
        returns the next 64-bit unsigned integer
    below(n)
        returns an unbiased integer in [0, n)
    random()
        returns a float in [0, 1) with 53 random bits
    """
    __slots__ = ("state", )

    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError(f"Expected n > 0, got {n}")
        # Rejection keeps the draw uniform when n does not divide 2**64
        limit = ((MASK64 + 1) // n) * n
        while True:
            x = self.next()
            if x < limit:
                return x % n

    def random(self) -> float:
        return (self.next() >> 11) * (1.0 / (1 << 53))


def deriveSeed(seed: int, *parts: int) -> int:
    """Returns a child seed for (seed, *parts).
    Distinct part tuples give independent streams.
    """
    h = mix64((seed + GOLDEN_GAMMA) & MASK64)
    for part in parts:
        h = mix64(((h ^ (part & MASK64)) + GOLDEN_GAMMA) & MASK64)
    return h


def nameHash(text: str) -> int:
    """Returns a 64-bit hash of text that is stable across processes
    (unlike hash()).
    """
    digest = hashlib.blake2b(text.encode('utf-8'), digest_size=8).digest()
    return int.from_bytes(digest, 'little')
