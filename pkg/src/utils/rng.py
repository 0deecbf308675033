"""
Random Stream Derivation
Every random draw in an experiment comes from a Philox stream keyed by
(master_seed, tag, *positional key), so results never depend on worker count
or completion order.
"""

from enum import IntEnum

import numpy as np


class StreamTag(IntEnum):
    """First spawn-key word of each stream family."""
    CHANNEL = 1      # (trial)          SIM-user fading, shared across L and schemes
    DIRECT = 2       # (M, trial)       no-SIM fading for the ZF baselines
    WBF = 3          # (L, trial)       optimizer restarts; joint, average-pa and refine share it
    CODEBOOK = 4     # (L, trial)
    DOA_TRAIN = 5    # (trial)          target positions, shared across L
    DOA_TEST = 6     # (trial)
    DOA_INIT = 7     # (L, trial)       initial phases
    DOA_NOISE = 8    # (L, trial)       receiver noise at test time
    DOA_BATCH = 9    # (L, trial)       batch shuffling and SPSA perturbations


def stream(master_seed: int, tag: StreamTag, *key: int) -> np.random.Generator:
    """
    Independent generator for one positional key.

    Args:
        master_seed: Non-negative experiment seed
        tag: Stream family
        *key: Non-negative integers locating the task (layer count, trial index, ...)

    Returns:
        numpy Generator over a Philox bit generator
    """
    if master_seed < 0 or any(k < 0 for k in key):
        raise ValueError(f"seed and stream key must be non-negative, got {master_seed}, {key}")
    sequence = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(tag), *map(int, key)))
    return np.random.Generator(np.random.Philox(sequence))
