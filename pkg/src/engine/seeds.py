"""Per-trial seeds derived from a master seed and the trial index."""
from __future__ import annotations

import numpy as np


def trial_seed(master: int, trial: int) -> int:
    """
    64-bit seed of trial *trial*: the first word of
    ``SeedSequence(master, spawn_key=(trial,))``. Depends only on the pair, so
    adding trials never changes earlier trials' streams.
    """
    ss = np.random.SeedSequence(int(master), spawn_key=(int(trial),))
    return int(ss.generate_state(1, np.uint64)[0])


def trial_seeds(master: int, trials: int, start: int = 0) -> np.ndarray:
    return np.array([trial_seed(master, i) for i in range(start, start + trials)], dtype=np.uint64)


def trial_rngs(seeds) -> list[np.random.Generator]:
    return [np.random.default_rng(int(s)) for s in seeds]
