"""Portable seedable random numbers for the search core.

The generator is xoshiro256** (Blackman & Vigna, 2018) with its 256-bit
state expanded from a 64-bit seed by SplitMix64, as recommended by the
authors.  The same seed yields the same stream on any platform, so a run
is fully described by its seed.

Bounded integers use rejection sampling on the raw 64-bit output
(``r % bound`` is accepted only when ``r >= (2**64 - bound) % bound``),
which is unbiased and needs no floating point.

Every kernel here takes the state as a ``uint64[4]`` array and mutates it
in place, so the jitted search loop and the Python helpers share a stream.
"""

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1


def splitmix64(x):
    """Return ``(next_state, output)`` of one SplitMix64 step (pure Python)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def seed_state(seed):
    """Expand a 64-bit seed into a fresh xoshiro256** state array."""
    x = int(seed) & MASK64
    words = []
    for _ in range(4):
        x, out = splitmix64(x)
        words.append(out)
    return np.array(words, dtype=np.uint64)


def derive_seed(master, index):
    """Per-stream seed ``master XOR index``; injective in ``index`` for a fixed master."""
    return (int(master) ^ int(index)) & MASK64


def worker_seed(run_seed, rank):
    """Seed of worker ``rank`` inside one run; rank 0 keeps the run seed.

    The rank is placed in the upper 32 bits, so (run index, rank) pairs stay
    distinct as long as run indices are below 2**32.
    """
    return derive_seed(run_seed, int(rank) << 32)


@njit(cache=True, nogil=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True, nogil=True)
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True, nogil=True)
def below(s, bound):
    """Uniform integer in ``[0, bound)``; ``bound`` must be positive."""
    b = np.uint64(bound)
    threshold = (np.uint64(0) - b) % b
    while True:
        r = next_u64(s)
        if r >= threshold:
            return np.int64(r % b)


@njit(cache=True, nogil=True)
def shuffle_inplace(s, arr):
    """Fisher-Yates shuffle of a 1-D array."""
    for i in range(arr.shape[0] - 1, 0, -1):
        j = below(s, i + 1)
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


class Xoshiro256:
    """xoshiro256** stream object.

    >>> rng = Xoshiro256(7)
    >>> rng.integers(10) < 10
    True
    """

    def __init__(self, seed=0):
        self.seed = int(seed) & MASK64
        self.state = seed_state(self.seed)

    def next_u64(self):
        return int(next_u64(self.state))

    def integers(self, bound):
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        return int(below(self.state, bound))

    def shuffle(self, arr):
        shuffle_inplace(self.state, arr)

    def permutation(self, values):
        out = np.array(values, dtype=np.int64)
        shuffle_inplace(self.state, out)
        return out

    def copy(self):
        other = Xoshiro256.__new__(Xoshiro256)
        other.seed = self.seed
        other.state = self.state.copy()
        return other
