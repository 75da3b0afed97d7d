"""Counter-based randomness for bit-reproducible shuffles and weight init.

Everything here is built on splitmix64, a stateless 64-bit mixing function
evaluated at (seed, counter) pairs.  Because the outputs depend only on
integer arithmetic mod 2**64, permutations and initial weights reproduce
bit-for-bit across platforms, interpreter versions, and even languages.
The exact recipe is documented in the README so splits can be recomputed
independently.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


def splitmix64(seed: int, counters) -> np.ndarray:
    """Raw 64-bit outputs for ``seed`` at the given counter positions."""
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(_U64(seed & 0xFFFFFFFFFFFFFFFF) + (c + _U64(1)) * _GOLDEN)


def derive_seed(seed: int, *tags: int) -> int:
    """Fold integer tags into a seed, e.g. per-epoch or per-tensor streams."""
    s = _U64(seed & 0xFFFFFFFFFFFFFFFF)
    for tag in tags:
        with np.errstate(over="ignore"):
            s = _mix(s + (_U64(tag & 0xFFFFFFFFFFFFFFFF) + _U64(1)) * _GOLDEN)
    return int(s)


def counter_uniform(seed: int, n: int, start: int = 0) -> np.ndarray:
    """n float64 values in [0, 1), from counters start..start+n-1."""
    raw = splitmix64(seed, np.arange(start, start + n, dtype=np.uint64))
    return (raw >> _U64(11)).astype(np.float64) * (2.0 ** -53)


def permutation(n: int, seed: int) -> np.ndarray:
    """Fisher-Yates permutation of range(n) driven by splitmix64.

    Swap i (from n-1 down to 1) uses j = splitmix64(seed, i) mod (i + 1).
    The modulo bias is irrelevant for reproducibility and negligible for
    n << 2**64.
    """
    ids = np.arange(n, dtype=np.int64)
    if n < 2:
        return ids
    raw = splitmix64(seed, np.arange(1, n, dtype=np.uint64))
    for i in range(n - 1, 0, -1):
        j = int(raw[i - 1] % _U64(i + 1))
        ids[i], ids[j] = ids[j], ids[i]
    return ids


def shuffled(values, seed: int) -> list:
    """Deterministically shuffled copy of a sequence."""
    values = list(values)
    return [values[i] for i in permutation(len(values), seed)]
