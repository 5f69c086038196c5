"""SplitMix64, the PRNG behind bootstraps, feature draws and fold assignment.

The generator is tiny and fully specified, so a forest can be reproduced
bit-for-bit from (data, params, seed) by any implementation:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)                      (all arithmetic mod 2**64)

A bounded draw in [0, n) is ``next() % n``.  Tree t of a forest with seed s
starts from state ``mix64(s + t)``, where ``mix64`` is one SplitMix64 step
applied to that value; trees are therefore independent of training order.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MUL1 = 0xBF58476D1CE4E5B9
MUL2 = 0x94D049BB133111EB


def _finalize(z: int) -> int:
    z = ((z ^ (z >> 30)) * MUL1) & MASK64
    z = ((z ^ (z >> 27)) * MUL2) & MASK64
    return z ^ (z >> 31)


def mix64(value: int) -> int:
    return _finalize((value + GOLDEN) & MASK64)


def tree_state(seed: int, tree_index: int) -> int:
    return mix64((seed + tree_index) & MASK64)


class SplitMix64:
    """Pure-Python stream, bit-compatible with the compiled kernels."""

    def __init__(self, state: int):
        self.state = state & MASK64

    def next(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return _finalize(self.state)

    def below(self, n: int) -> int:
        return self.next() % n

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates shuffle of range(n), front to back."""
        out = list(range(n))
        for i in range(n - 1):
            j = i + self.below(n - i)
            out[i], out[j] = out[j], out[i]
        return out


_GOLDEN = np.uint64(GOLDEN)
_MUL1 = np.uint64(MUL1)
_MUL2 = np.uint64(MUL2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


@njit(nogil=True, cache=True)
def nb_next(state):
    """Advance ``state`` (a length-1 uint64 array) and return the output."""
    s = state[0] + _GOLDEN
    state[0] = s
    z = (s ^ (s >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


@njit(nogil=True, cache=True)
def nb_below(state, n):
    return np.int64(nb_next(state) % np.uint64(n))
