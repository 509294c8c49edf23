"""Counter-based splittable random streams.

Every randomized operation in the package draws from ``stream(seed, *indices)``.
Streams for distinct index tuples are statistically independent, so parallel
trials can each take ``stream(seed, trial)`` without coordination, and a rerun
with the same (seed, indices) reproduces the same draws bit-for-bit.
"""

import numpy as np


def stream(seed: int, *indices: int) -> np.random.Generator:
    """Return an independent Philox generator for the given seed and stream indices."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(seed=ss))
