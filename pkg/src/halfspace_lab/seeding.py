"""Per-trial random streams.

Trial ``i`` of a run with master seed ``m`` uses
``PCG64(splitmix64(m ^ splitmix64(i)))``. Both PCG64 and splitmix64 are
fully specified integer algorithms, so streams do not depend on platform or
on which worker thread runs the trial.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
INSTANCE_INDEX = MASK64


def splitmix64(x: int) -> int:
    z = (x + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, trial_index: int) -> int:
    return splitmix64((master_seed & MASK64) ^ splitmix64(trial_index & MASK64))


def derive_stream(master_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, trial_index)))


def instance_stream(master_seed: int) -> np.random.Generator:
    """Stream for objects shared by all trials of a run (e.g. a fixed center)."""
    return derive_stream(master_seed, INSTANCE_INDEX)
