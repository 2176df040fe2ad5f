"""Seed derivation.

Every random stream in the package is keyed by ``(master_seed, tag, index)``
and mixed through splitmix64, so results never depend on how work is
scheduled across threads.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    """Finalizer of the splitmix64 generator (a bijection on 64-bit ints)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _tag_hash(tag: str) -> int:
    # FNV-1a, 64 bit
    h = 0xCBF29CE484222325
    for byte in tag.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def derive_seed(master: int, tag: str, index: int = 0) -> int:
    """Return a 64-bit seed for stream ``index`` of operation ``tag``."""
    z = splitmix64((master + _tag_hash(tag)) & MASK64)
    return splitmix64((z + (index + 1) * GOLDEN_GAMMA) & MASK64)


def derive_rng(master: int, tag: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, tag, index)))
