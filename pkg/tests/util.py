"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, PCG64


def sinkhorn_symmetric(n: int, gen: Generator, tol: float = 1e-15, max_iter: int = 10_000) -> np.ndarray:
    """Random symmetric doubly stochastic matrix with full support."""
    w = gen.random((n, n)) + 0.2
    w = 0.5 * (w + w.T)
    for _ in range(max_iter):
        d = w.sum(axis=1)
        if np.max(np.abs(d - 1.0)) < tol:
            break
        s = 1.0 / np.sqrt(d)
        w = w * s[:, None] * s[None, :]
        w = 0.5 * (w + w.T)  # keep symmetry against rounding
    return w


def lazy_uniform_kernel(n: int, alpha: float = 0.7) -> np.ndarray:
    """alpha * uniform-off-diagonal + (1 - alpha) * identity."""
    q = np.full((n, n), alpha / (n - 1))
    np.fill_diagonal(q, 1.0 - alpha)
    return q


def clone_bitgen(bitgen: PCG64) -> PCG64:
    """Fresh PCG64 at exactly the same stream position."""
    twin = PCG64()
    twin.state = bitgen.state
    return twin


class CountingGenerator:
    """Wraps a Generator, counting uniform draws (duck-typed for steps)."""

    def __init__(self, gen: Generator):
        self._gen = gen
        self.draws = 0

    def random(self, *args, **kwargs):
        out = self._gen.random(*args, **kwargs)
        self.draws += int(np.size(out))
        return out
