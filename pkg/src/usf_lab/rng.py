"""Seed derivation and the SplitMix64 stream shared by every sampler.

All randomness in the package flows from 64-bit seeds.  A trial's seed is
``derive_seed(master, i)``, and inside a trial each walk or forest gets its own
stream via a second derivation.  The Python and numba implementations below
produce identical streams, so a path generated by a Python helper matches the
one a compiled kernel would produce from the same seed.
"""
from __future__ import annotations

import numpy as np
from numba import njit, uint64

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int (bit-exact with the kernels)."""
    z &= MASK64
    z ^= z >> 30
    z = (z * _M1) & MASK64
    z ^= z >> 27
    z = (z * _M2) & MASK64
    z ^= z >> 31
    return z


def derive_seed(master: int, i: int) -> int:
    """Seed of trial ``i`` under ``master``."""
    return mix64((master & MASK64) ^ (((i + 1) * GOLDEN) & MASK64))


class SplitMix64:
    """Counter-based generator: output k is ``mix64(seed + k * GOLDEN)``."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.state = self.seed

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) from the high 32 bits (n < 2**32)."""
        return ((self.next_u64() >> 32) * n) >> 32

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


# ---------------------------------------------------------------- numba side

@njit(inline="always", cache=True)
def nb_mix64(z):
    z = uint64(z)
    z = (z ^ (z >> uint64(30))) * uint64(_M1)
    z = (z ^ (z >> uint64(27))) * uint64(_M2)
    return z ^ (z >> uint64(31))


@njit(inline="always", cache=True)
def nb_derive_seed(master, i):
    return nb_mix64(uint64(master) ^ (uint64(i + 1) * uint64(GOLDEN)))


@njit(inline="always", cache=True)
def nb_next(state):
    """Advance a stream; returns (new_state, output)."""
    s = uint64(state) + uint64(GOLDEN)
    return s, nb_mix64(s)


@njit(inline="always", cache=True)
def nb_below(u, n):
    return np.int64(((u >> uint64(32)) * uint64(n)) >> uint64(32))


@njit(inline="always", cache=True)
def nb_uniform(u):
    return np.float64(u >> uint64(11)) * (1.0 / 9007199254740992.0)
