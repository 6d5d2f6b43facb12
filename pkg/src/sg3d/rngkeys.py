"""Deterministic RNG substream derivation.

Every random draw in a chain comes from a stream keyed by
(master seed, domain tag, iteration, window, slice/column indices).
Streams are therefore independent of thread scheduling and of whether a
run was resumed from a checkpoint: the same key always yields the same
stream.
"""

from __future__ import annotations

import numpy as np

# domain tags keep unrelated draws on disjoint streams
TAG_COVER = 1
TAG_LIKELIHOOD = 2
TAG_PRIOR = 3
TAG_TV = 4
TAG_DEGRADE = 5
TAG_PHANTOM = 6
TAG_INIT = 7


def substream(*key: int) -> np.random.Generator:
    """Generator for the stream identified by an integer key path."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def seed64(*key: int) -> int:
    """Stable 64-bit seed for the stream identified by the key path.

    Used where a single integer must travel (e.g. to a remote prior
    server). ``np.random.default_rng(seed64(k))`` on the receiving side
    is the canonical way to open the stream.
    """
    return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0])
