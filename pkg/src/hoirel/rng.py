"""Counter-based deterministic random stream for fixture generation.

Every generated value is a pure function of (seed, labels, counter) through
a 64-bit mixing function, so generation order never matters and identical
seeds give identical bytes on any platform. Keys are derived from the
labels with BLAKE2 (Python's built-in ``hash`` is salted per process and
must not be used here).
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """SplitMix64 finalizer; bijective on 64-bit integers."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * _M1) & _MASK64
    x = ((x ^ (x >> 27)) * _M2) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def key_for(seed: int, *labels) -> int:
    """Derive a 64-bit stream key from a seed and a label path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(8, "little", signed=True))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def _mix_array(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(_M1)
    x ^= x >> np.uint64(27)
    x *= np.uint64(_M2)
    x ^= x >> np.uint64(31)
    return x


class Stream:
    """Indexable pseudo-random stream for one (seed, labels...) key."""

    def __init__(self, seed: int, *labels):
        self._key = key_for(seed, *labels)

    def raw(self, index: int) -> int:
        return mix64(self._key + (index + 1) * _GAMMA)

    def raw_block(self, n: int, start: int = 0) -> np.ndarray:
        idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            state = np.uint64(self._key) + idx * np.uint64(_GAMMA)
        return _mix_array(state)

    def uniform(self, index: int, low: float = 0.0, high: float = 1.0) -> float:
        u = (self.raw(index) >> 11) * 2.0**-53
        return low + (high - low) * u

    def uniform_block(self, n, low=0.0, high=1.0, start=0) -> np.ndarray:
        """n float32 values in [low, high) from counters start..start+n."""
        u = (self.raw_block(n, start) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return (low + (high - low) * u).astype(np.float32)

    def integer(self, index: int, low: int, high: int) -> int:
        """One integer in [low, high)."""
        if high <= low:
            raise ValueError("empty integer range")
        return low + self.raw(index) % (high - low)
