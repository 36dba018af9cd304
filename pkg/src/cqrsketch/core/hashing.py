"""
Seeded hashing and random streams

All randomness in cqrsketch flows from integer seeds through a 64-bit
splitmix avalanche mixer. Row hashes for sketches are mix(seed, family,
block, row); random streams are numpy Generators over the counter-based
Philox bit generator keyed by mix(seed, *stream_ids), so repetition r of a
run draws the same numbers regardless of which thread runs it.
"""

from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)

# Stable integer tags; changing one changes every sketch built with it
FAMILY_TAGS = {
    "hashing_trick": 1,
    "hash_embedding": 2,
    "count_sketch": 3,
    "qr_concat": 4,
    "qr_hybrid": 5,
    "sign": 6,
    "weight": 7,
}


def splitmix64(values: Union[int, np.ndarray]) -> np.ndarray:
    """Vectorized splitmix64 finalizer over uint64 (wrapping arithmetic)"""
    z = np.atleast_1d(np.asarray(values, dtype=np.uint64))
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MUL1
        z = (z ^ (z >> np.uint64(27))) * _MUL2
        z = z ^ (z >> np.uint64(31))
    return z


def mix(*parts: int) -> int:
    """Fold integers into one 64-bit hash; order matters"""
    state = np.uint64(0)
    for part in parts:
        state = splitmix64(np.uint64(int(part) & MASK64) ^ state)[0]
    return int(state)


def derive_seed(seed: int, *stream: int) -> int:
    """Sub-seed for an independent stream; non-negative and < 2**63"""
    return mix(seed, *stream) >> 1


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox-backed generator for (seed, stream ids)"""
    return np.random.Generator(np.random.Philox(key=mix(seed, *stream)))


def hash_rows(seed: int, family: str, block: int, ids: np.ndarray) -> np.ndarray:
    """64-bit hash of every id in ids for one (seed, family, block)"""
    base = np.uint64(mix(seed, FAMILY_TAGS[family], block))
    return splitmix64(splitmix64(ids) ^ base)


def reduce_range(hashes: np.ndarray, size: int) -> np.ndarray:
    """Multiply-shift reduction of 64-bit hashes to [0, size)"""
    if size <= 0 or size >= 1 << 32:
        raise ValueError(f"range size must be in [1, 2**32) (got {size})")
    with np.errstate(over="ignore"):
        reduced = ((hashes >> np.uint64(32)) * np.uint64(size)) >> np.uint64(32)
    return reduced.astype(np.int64)


def hash_signs(hashes: np.ndarray) -> np.ndarray:
    """±1 from the lowest bit; independent of the high bits used by reduce_range"""
    return np.where((hashes & np.uint64(1)) == 0, 1.0, -1.0)
