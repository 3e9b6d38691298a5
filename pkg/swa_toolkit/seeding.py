"""Seeded, counter-based random generators.

Every random stream is derived from an explicit tuple of integers (a run
seed plus stream identifiers such as the epoch), so no global random state
is ever consulted and streams never interfere with one another.
"""

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    """Identifiers that keep independent random streams apart."""

    INIT = 0
    SHUFFLE = 1
    DATA = 2
    PROBE = 3


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a Philox generator keyed by ``(seed, *keys)``.

    Args:
        seed: Non-negative 64-bit run seed.
        keys: Additional non-negative integers (stream id, epoch, ...).
    """
    entropy = [int(seed), *(int(k) for k in keys)]
    if any(value < 0 for value in entropy):
        raise ValueError(f"Seeds must be non-negative, got {entropy}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
