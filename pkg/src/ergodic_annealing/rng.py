"""Seed derivation and generator construction.

All randomness in the package flows through numpy's PCG64 bit generator.
Independent streams are derived from a master seed with spawn keys, so a
stream for (seed, i, role) never depends on whether any other stream was
used. One stream is owned by exactly one run.
"""

from __future__ import annotations

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence

_MAX_SEED = 2**64 - 1


def check_seed(seed: int) -> int:
    """Validate a 64-bit unsigned seed and return it as a plain int."""
    seed = int(seed)
    if not 0 <= seed <= _MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def seed_sequence(seed: int | SeedSequence, *key: int) -> SeedSequence:
    """SeedSequence for `seed`, optionally descended along a spawn-key path."""
    key = tuple(int(k) for k in key)
    if isinstance(seed, SeedSequence):
        if not key:
            return seed
        return SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + key)
    return SeedSequence(check_seed(seed), spawn_key=key)


def bit_generator(seed: int | SeedSequence, *key: int) -> PCG64:
    """Fresh PCG64 stream for (seed, *key)."""
    return PCG64(seed_sequence(seed, *key))


def generator(seed: int | SeedSequence, *key: int) -> Generator:
    """Fresh Generator wrapping :func:`bit_generator`."""
    return Generator(bit_generator(seed, *key))


def uniform_distribution(n: int) -> np.ndarray:
    """Uniform probability vector over n items."""
    if n < 1:
        raise ValueError("n must be positive")
    return np.full(n, 1.0 / n)
