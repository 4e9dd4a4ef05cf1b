"""Seed derivation for reproducible, order-independent Monte Carlo streams.

Every trial owns a private ``numpy.random.Generator`` (PCG64 bit generator,
ziggurat normal transform) whose seed is a SplitMix64 mix of
``(master_seed, tag, index)``::

    z = splitmix64(master_seed)
    z = splitmix64(z ^ tag)
    z = splitmix64(z ^ index)

Because a trial's stream depends only on that triple, results do not depend
on how trials are scheduled across threads.
"""

import numpy as np

MASK64 = (1 << 64) - 1

# hypothesis tags
TAG_NULL = 0
TAG_ALT = 1
TAG_RECOVERY = 2
TAG_PAIRS = 3
TAG_CROSSVAL = 4


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, tag: int, index: int) -> int:
    """Mix a master seed, a stream tag and a trial index into a 64-bit seed."""
    z = splitmix64(master_seed & MASK64)
    z = splitmix64(z ^ (tag & MASK64))
    return splitmix64(z ^ (index & MASK64))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & MASK64))


def trial_rng(master_seed: int, tag: int, index: int) -> np.random.Generator:
    return make_rng(derive_seed(master_seed, tag, index))


def as_rng(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
