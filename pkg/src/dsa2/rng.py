"""Seeded random streams.

Every randomized routine draws from numpy's ``PCG64`` bit generator seeded
through a ``SeedSequence`` built from ``(seed, stream)``.  Distinct streams
of the same seed are statistically independent, so topology draws never
perturb instance draws.
"""

import numpy as np

PRNG_ALGORITHM = "numpy.PCG64/SeedSequence"

STREAM_TOPOLOGY = 0
STREAM_INSTANCE = 1
STREAM_SAMPLING = 2


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))
