"""Counter-based splitmix64 streams usable inside numba kernels.

Each stream is a one-element uint64 array mutated in place, so walks and
training workers can own independent, schedule-free random streams.
"""
import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@numba.njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(cache=True)
def next_u64(state):
    state[0] += _GOLDEN
    return mix64(state[0])


@numba.njit(cache=True)
def uniform(state):
    """Float in [0, 1) with 53 random bits."""
    return float(next_u64(state) >> _S11) * _INV53


@numba.njit(cache=True)
def randbelow(state, n):
    k = np.int64(uniform(state) * n)
    return k if k < n else n - 1


@numba.njit(cache=True)
def stream(seed, a, b):
    """Seed a stream from (seed, a, b); distinct triples give unrelated streams."""
    s = np.empty(1, dtype=np.uint64)
    s[0] = mix64(mix64(mix64(np.uint64(seed) + _GOLDEN) ^ np.uint64(a)) + _GOLDEN ^ np.uint64(b))
    return s
