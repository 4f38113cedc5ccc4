"""Deterministic seed derivation.

Every random stream in the package is keyed by a path of integers
starting at the master seed.  Each step applies the splitmix64 finalizer

    z += 0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z ^= z >> 31

(all arithmetic modulo 2**64) and the result seeds a numpy ``PCG64``
generator.  Streams with different paths are independent for all
practical purposes and do not depend on scheduling or worker count.
"""
import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

# Stream tags used throughout the package.
STREAM_INNOVATIONS = 1
STREAM_NOISE = 2
STREAM_FACTORS = 3
STREAM_COEFFICIENTS = 11
STREAM_LOADINGS = 12
STREAM_MIXING = 13


def splitmix64(z):
    """One splitmix64 step on a Python integer, returned in [0, 2**64)."""
    z = (int(z) + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(master, *path):
    """Derive a 64-bit seed from ``master`` and a path of integer keys."""
    s = splitmix64(int(master) & MASK64)
    for key in path:
        s = splitmix64(s ^ splitmix64(int(key) & MASK64))
    return s


def rng_from(seed, *path):
    """Return a ``numpy.random.Generator`` for the derived seed."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *path)))
