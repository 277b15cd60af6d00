"""Seeded randomness.

Every random draw in the package goes through a PCG64 generator built by
``make_rng``. Sub-seeds are derived with ``derive_seed`` from a tuple of keys
(master seed, dataset name, repeat, fold, round, ...), so any single cell of
an experiment can be rerun in isolation and draws the same numbers.
"""

import zlib
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.Generator]


def make_rng(seed: SeedLike) -> np.random.Generator:
    """PCG64 generator for an integer seed; generator objects pass through."""
    if isinstance(seed, (int, np.integer)):
        return np.random.Generator(np.random.PCG64(int(seed)))
    return seed


def _key_to_int(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    value = int(key)
    if value < 0:
        raise ValueError(f"seed keys must be non-negative, got {value}")
    return value


def derive_seed(*keys) -> int:
    """Map (seed, name, index, ...) to an independent 64-bit seed."""
    # fixed-width words plus a length prefix keep distinct key tuples distinct
    entropy = [len(keys)]
    for key in keys:
        value = _key_to_int(key) & 0xFFFFFFFFFFFFFFFF
        entropy.extend([value & 0xFFFFFFFF, value >> 32])
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])
