"""Counter-based random stream (SplitMix64).

Every draw is a pure function of (seed, counter), so a stream is fully
described by two integers. Checkpoints persist exactly that pair and
restoring is O(1); no generator state blob is needed.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(seed: int, counter: int) -> int:
    """Return the 64-bit SplitMix64 output for one (seed, counter) pair."""
    z = (seed + (counter + 1) * _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SeededStream:
    """Deterministic uniform stream; each public call consumes one draw."""

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & _MASK
        self.counter = int(counter)

    def uniform(self) -> float:
        """One double in [0, 1), consuming exactly one counter step."""
        z = splitmix64(self.seed, self.counter)
        self.counter += 1
        return (z >> 11) * 2.0 ** -53

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n), consuming exactly one draw."""
        if n <= 0:
            raise ValueError("randint requires n >= 1")
        k = int(self.uniform() * n)
        return min(k, n - 1)

    def choice(self, seq):
        """Uniform element of a non-empty sequence; one draw."""
        return seq[self.randint(len(seq))]

    @property
    def state(self) -> tuple[int, int]:
        return (self.seed, self.counter)
