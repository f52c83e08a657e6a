"""Deterministic child-seed derivation.

Every stochastic component derives its RNG from a (master_seed, index) pair
via SplitMix64, so adding learners or reordering work never perturbs the
streams of existing components.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(seed: int, index: int) -> int:
    """Mix a 64-bit master seed with an index into an independent child seed.

    Standard SplitMix64 finalizer applied to ``seed + (index+1) * golden``.
    Returns a value in [0, 2**64).
    """
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def child_rng(seed: int, index: int) -> np.random.Generator:
    """PCG64 generator seeded from splitmix64(seed, index)."""
    return np.random.Generator(np.random.PCG64(splitmix64(seed, index)))
