"""Seeding helpers.

Every random draw in the package comes from a Philox generator keyed by the
user's 64-bit seed plus a purpose tag and an optional index, so that
permutations, puncturing patterns and channel noise never share a stream and
results do not depend on the order of the draws or on the number of workers.
"""

import zlib

import numpy as np

__all__ = [
    "derive_seed",
    "make_rng",
]


SEED_MASK = (1 << 64) - 1


def _purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def _check_seed(seed):
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise TypeError(f"seed must be an integer (got type {seed.__class__.__name__})")
    if not 0 <= seed <= SEED_MASK:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return int(seed)


def derive_seed(seed, purpose, *indices) -> int:
    """Return the 64-bit subseed for *purpose* and *indices* under *seed*."""
    seq = np.random.SeedSequence(_check_seed(seed), spawn_key=(_purpose_key(purpose), *map(int, indices)))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed, purpose, *indices) -> np.random.Generator:
    """Return a Philox-backed generator for *purpose* and *indices*."""
    seq = np.random.SeedSequence(_check_seed(seed), spawn_key=(_purpose_key(purpose), *map(int, indices)))
    return np.random.Generator(np.random.Philox(seq))
