"""Order-independent seed derivation for replicates and sub-streams."""

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master, *path):
    """Hash ``(master, k1, k2, ...)`` to a 64-bit seed.

    Each element is folded in with one SplitMix64 round, so the result only
    depends on the path, never on the order replicates are executed in.
    """
    s = splitmix64(int(master) & _MASK)
    for k in path:
        s = splitmix64(s ^ (int(k) & _MASK))
    return s


def rng_for(seed, *path):
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *path)))
