"""Stateless counter-based uniforms.

Every random number in the package is a pure function of integer keys
(seed, site) or (seed, replica, step, component), so any window of an
environment or any subset of Monte Carlo replicas can be regenerated in
isolation and in any order.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

# domain tags keep environment draws and walker draws in disjoint streams
ENV_TAG = 0x454E56
WALK_TAG = 0x57414C4B
ENV_SEED_TAG = 0x5345454D


def as_u64(values) -> np.ndarray:
    """Reinterpret signed or unsigned integers as uint64 (two's complement)."""
    arr = np.asarray(values)
    if arr.dtype == np.uint64:
        return arr
    return np.array(arr, dtype=np.int64).view(np.uint64)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer applied elementwise; wraps modulo 2**64."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def key(*parts: int) -> np.uint64:
    """Fold a tuple of Python ints into a single 64-bit key."""
    h = np.zeros((), dtype=np.uint64)
    for p in parts:
        h = splitmix64(h ^ np.uint64(int(p) & 0xFFFFFFFFFFFFFFFF))
    return h


def uniforms(base: np.ndarray, counter) -> np.ndarray:
    """Uniform doubles in [0, 1) from ``splitmix64(base ^ counter)``.

    ``base`` and ``counter`` broadcast against each other; both are taken
    modulo 2**64.
    """
    c = as_u64(counter)
    h = splitmix64(np.asarray(base, dtype=np.uint64) ^ c)
    return (h >> _S11).astype(np.float64) * _INV53
