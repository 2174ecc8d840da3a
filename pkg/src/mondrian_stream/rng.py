"""Seeded xoshiro256** generator over a ``uint64[4]`` state array.

The forest kernels are compiled with numba; a plain state array keeps random
draws inside compiled code cheap and makes the generator state part of the
snapshot like any other model array. Seeds are expanded with NumPy's
``SeedSequence``.
"""

import math

import numba
import numpy as np

_ROT7 = np.uint64(7)
_ROT57 = np.uint64(57)
_ROT45 = np.uint64(45)
_ROT19 = np.uint64(19)
_SHIFT17 = np.uint64(17)
_SHIFT11 = np.uint64(11)
_FIVE = np.uint64(5)
_NINE = np.uint64(9)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


def make_state(seed: int) -> np.ndarray:
    state = np.random.SeedSequence(seed).generate_state(4, np.uint64)
    if not state.any():
        state[0] = 1
    return state


@numba.njit(cache=True, inline="always")
def next_u64(s):
    s0 = s[0]
    s1 = s[1]
    s2 = s[2]
    s3 = s[3]
    x = s1 * _FIVE
    result = ((x << _ROT7) | (x >> _ROT57)) * _NINE
    t = s1 << _SHIFT17
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = (s3 << _ROT45) | (s3 >> _ROT19)
    s[0] = s0
    s[1] = s1
    s[2] = s2
    s[3] = s3
    return result


@numba.njit(cache=True, inline="always")
def uniform(s):
    """Double in [0, 1) from the top 53 bits."""
    return float(next_u64(s) >> _SHIFT11) * _TO_UNIT


@numba.njit(cache=True, inline="always")
def exponential(s, rate):
    return -math.log1p(-uniform(s)) / rate


@numba.njit(cache=True)
def uniform_array(s, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = uniform(s)
    return out
