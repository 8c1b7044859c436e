"""Deterministic 64-bit mixing primitives and keyed random streams.

Every random decision in the pipeline (batch shuffling, neighbor
selection, partition hashing) is derived from the SplitMix64 finalizer
applied to a counter, so any (seed, epoch, batch, layer, node) coordinate
maps to the same value on every worker, every process, every run.

Constants are the published SplitMix64 constants:
  GOLDEN = 0x9E3779B97F4A7C15 (2^64 / phi)
  MIX1   = 0xBF58476D1CE4E5B9
  MIX2   = 0x94D049BB133111EB
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_GOLDEN_U64 = np.uint64(GOLDEN)
_MIX1_U64 = np.uint64(_MIX1)
_MIX2_U64 = np.uint64(_MIX2)


def mix64(x: int) -> int:
    """SplitMix64 finalizer; a bijection on 64-bit integers."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized SplitMix64 finalizer. Input is converted to uint64."""
    x = np.asarray(x).astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= _MIX1_U64
    x ^= x >> np.uint64(27)
    x *= _MIX2_U64
    x ^= x >> np.uint64(31)
    return x


def stream_keys(master: int, count: int) -> np.ndarray:
    """First `count` outputs of the counter stream keyed by `master`."""
    ctr = np.arange(1, count + 1, dtype=np.uint64) * _GOLDEN_U64
    return mix64_array(ctr + np.uint64(master & MASK64))


def shuffled(ids: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic permutation of `ids` keyed by `seed`.

    Sorting per-position random keys gives a uniform permutation (ties
    are broken by position by the stable sort; collision probability is
    ~n^2/2^64 and irrelevant here).
    """
    keys = stream_keys(mix64(seed), len(ids))
    order = np.argsort(keys, kind="stable")
    return np.asarray(ids)[order]
