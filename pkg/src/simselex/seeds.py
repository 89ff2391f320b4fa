"""Deterministic seed derivation.

One master seed drives every random component.  Each job (replicate index,
grid index, pseudodata replicate, fold shuffle, ...) derives its own stream
from the master seed and an integer key tuple, so parallel execution order
cannot change any result.
"""

import numpy as np


def child_seed(master: int, *key: int) -> int:
    """Derive a 63-bit child seed from a master seed and an integer key path."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def child_rng(master: int, *key: int) -> np.random.Generator:
    """Generator seeded by child_seed(master, *key)."""
    return np.random.default_rng(child_seed(master, *key))
