"""Finite-state Metropolis dynamics.

The state space is a finite action set A with a real payoff per action.
This module provides the acceptance rule, exact transition matrices and
their Gibbs / zero-temperature limit distributions, seeded trajectory
simulation, and the empirical-frequency and total-variation diagnostics
used by the convergence test suites.

Conventions shared with the compiled kernels (see ``_kernels``):

* every random choice is derived from a stream of uniform doubles;
* one proposal draw per step, plus one acceptance draw only when the
  proposed payoff is strictly worse;
* a proposal from the uniform kernel maps a draw ``x`` to the index
  ``int(x * (n - 1))``, skipping the current state;
* a proposal from an explicit matrix scans the cumulative row with a
  strict ``x < cum`` comparison.

Given the same seed, trajectories are bit-identical across the pure and
compiled kernel lanes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import _kernels, rng

ROW_SUM_TOL = 1e-12
SYMMETRY_TOL = 1e-12
ARGMAX_TOL = 1e-12


@dataclass(frozen=True)
class FiniteActionSpace:
    """An ordered finite set of at least two distinct actions."""

    actions: tuple[Any, ...]

    def __init__(self, actions: Sequence[Any]):
        actions = tuple(actions)
        if len(actions) < 2:
            raise ValueError("an action space needs at least two actions")
        if len(set(actions)) != len(actions):
            raise ValueError("action identifiers must be distinct")
        object.__setattr__(self, "actions", actions)

    @property
    def n(self) -> int:
        return len(self.actions)

    def index(self, action: Any) -> int:
        return self.actions.index(action)


@dataclass(frozen=True, eq=False)
class UtilityTable:
    """One finite payoff value per action."""

    values: np.ndarray
    space: FiniteActionSpace | None = None

    def __init__(self, values, space: FiniteActionSpace | None = None):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("utilities must be a one-dimensional sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("utilities must be finite")
        if space is not None and space.n != arr.size:
            raise ValueError("utility table does not match the action space")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "space", space)

    @property
    def n(self) -> int:
        return self.values.size


def as_values(u) -> np.ndarray:
    """Coerce a UtilityTable or array-like into a validated float array."""
    if isinstance(u, UtilityTable):
        return u.values
    return UtilityTable(u).values


class ProposalKernel:
    """Base class for exploration kernels over an action space.

    A kernel is defined by a symmetric irreducible stochastic matrix Q.
    The matrix may be explicit or implied by a move generator; in the
    latter case :meth:`matrix` is unavailable.
    """

    n: int

    def sample(self, current: int, x: float) -> int:
        """Map one uniform draw ``x`` in [0, 1) to a proposed index."""
        raise NotImplementedError

    def matrix(self) -> np.ndarray:
        raise ValueError("proposal kernel has no explicit matrix")

    def cumulative_rows(self) -> np.ndarray | None:
        """Row-wise cumulative sums of Q for the kernel lanes, or None
        when the lanes should use the built-in uniform proposal."""
        return None


class UniformProposal(ProposalKernel):
    """Propose uniformly over A minus the current state.

    Symmetric and irreducible for any n >= 2; this is the default
    exploration kernel when nothing problem-specific is supplied.
    """

    def __init__(self, n: int):
        n = int(n)
        if n < 2:
            raise ValueError("uniform proposal needs at least two actions")
        self.n = n

    def sample(self, current: int, x: float) -> int:
        j = int(x * (self.n - 1))
        if j >= self.n - 1:
            j = self.n - 2
        return j if j < current else j + 1

    def matrix(self) -> np.ndarray:
        q = np.full((self.n, self.n), 1.0 / (self.n - 1))
        np.fill_diagonal(q, 0.0)
        return q


class MatrixProposal(ProposalKernel):
    """Explicit symmetric irreducible stochastic proposal matrix."""

    def __init__(self, q):
        q = np.asarray(q, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 2:
            raise ValueError("proposal matrix must be square with n >= 2")
        if np.any(q < 0.0):
            raise ValueError("proposal matrix entries must be non-negative")
        row_err = np.max(np.abs(q.sum(axis=1) - 1.0))
        if row_err > ROW_SUM_TOL:
            raise ValueError(f"rows must sum to 1 (max error {row_err:.3e})")
        sym_err = np.max(np.abs(q - q.T))
        if sym_err > SYMMETRY_TOL:
            raise ValueError(f"proposal matrix must be symmetric (max error {sym_err:.3e})")
        if not _strongly_connected(q > 0.0):
            raise ValueError("proposal matrix support must be irreducible")
        self.n = q.shape[0]
        self._q = q
        self._cum = np.cumsum(q, axis=1)

    def sample(self, current: int, x: float) -> int:
        row = self._cum[current]
        for b in range(self.n):
            if x < row[b]:
                return b
        return self.n - 1

    def matrix(self) -> np.ndarray:
        return self._q.copy()

    def cumulative_rows(self) -> np.ndarray:
        return self._cum


def _strongly_connected(support: np.ndarray) -> bool:
    """BFS reachability of the support graph and its transpose from node 0."""
    n = support.shape[0]
    for adj in (support, support.T):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = []
            for a in frontier:
                for b in np.nonzero(adj[a])[0]:
                    if not seen[b]:
                        seen[b] = True
                        nxt.append(int(b))
            frontier = nxt
        if not seen.all():
            return False
    return True


@dataclass(frozen=True, eq=False)
class ChainConfig:
    """Initial distribution, inverse temperature and seed for one chain."""

    inverse_temperature: float
    seed: int
    initial_distribution: np.ndarray | None = None

    def __post_init__(self):
        if not (np.isfinite(self.inverse_temperature) and self.inverse_temperature > 0):
            raise ValueError("inverse temperature must be positive and finite")
        rng.check_seed(self.seed)
        if self.initial_distribution is not None:
            mu = np.asarray(self.initial_distribution, dtype=np.float64)
            if mu.ndim != 1 or np.any(mu < 0) or abs(mu.sum() - 1.0) > ROW_SUM_TOL:
                raise ValueError("initial distribution must be a probability vector")
            object.__setattr__(self, "initial_distribution", mu)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A realized state sequence a_0, ..., a_n over a space of given size."""

    states: np.ndarray
    n_actions: int

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.int64)
        if states.ndim != 1 or states.size == 0:
            raise ValueError("trajectory must be a non-empty index sequence")
        if states.min() < 0 or states.max() >= self.n_actions:
            raise ValueError("trajectory contains out-of-range state indices")
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return self.states.size


def acceptance_probability(u_current: float, u_proposed: float, beta: float) -> float:
    """Metropolis acceptance probability for moving to the proposed payoff.

    Equal or better payoffs are always accepted; a worse payoff is accepted
    with probability exp(beta * (u_proposed - u_current)).
    """
    if not (math.isfinite(u_current) and math.isfinite(u_proposed)):
        raise ValueError("utilities must be finite")
    if not (math.isfinite(beta) and beta > 0):
        raise ValueError("beta must be positive and finite")
    if u_proposed >= u_current:
        return 1.0
    return math.exp(beta * (u_proposed - u_current))


def gibbs_distribution(u, beta: float) -> np.ndarray:
    """Stationary law of the Metropolis chain: softmax of beta * u.

    Stabilized by subtracting max(u) before exponentiation, so extreme
    payoffs cannot overflow.
    """
    values = as_values(u)
    if not (math.isfinite(beta) and beta > 0):
        raise ValueError("beta must be positive and finite")
    w = np.exp(beta * (values - values.max()))
    return w / w.sum()


def limit_distribution(u, tol: float = ARGMAX_TOL) -> np.ndarray:
    """Zero-temperature limit: uniform over the argmax set of u.

    Values within ``tol`` of the maximum count as maximizers.
    """
    values = as_values(u)
    mask = values >= values.max() - tol
    return mask / mask.sum()


def metropolis_step(
    current: int,
    u,
    beta: float,
    kernel: ProposalKernel,
    gen: np.random.Generator,
) -> int:
    """One Metropolis transition from ``current``.

    Consumes exactly one proposal draw from ``gen`` and one acceptance
    draw only when the proposal has strictly lower payoff.
    """
    values = as_values(u)
    if not 0 <= current < values.size:
        raise ValueError("current state out of range")
    if not (math.isfinite(beta) and beta > 0):
        raise ValueError("beta must be positive and finite")
    b = kernel.sample(current, gen.random())
    du = values[b] - values[current]
    if du >= 0.0:
        return b
    if gen.random() < math.exp(beta * du):
        return b
    return current


def transition_matrix(u, beta: float, kernel: ProposalKernel) -> np.ndarray:
    """Exact one-step transition matrix P of the Metropolis chain.

    P(b|a) = Q(b|a) * min(1, exp(beta * (u(b) - u(a)))) off the diagonal,
    with the diagonal absorbing the rejected mass. Requires an explicit
    proposal matrix.
    """
    values = as_values(u)
    q = kernel.matrix()
    if q.shape[0] != values.size:
        raise ValueError("kernel size does not match the utility table")
    if not (math.isfinite(beta) and beta > 0):
        raise ValueError("beta must be positive and finite")
    du = values[None, :] - values[:, None]
    accept = np.minimum(1.0, np.exp(beta * np.minimum(du, 0.0)))
    p = q * accept
    np.fill_diagonal(p, 0.0)
    np.fill_diagonal(p, 1.0 - p.sum(axis=1))
    return p


def run_chain(config: ChainConfig, u, kernel: ProposalKernel, steps: int) -> Trajectory:
    """Simulate a_0 ~ mu followed by ``steps`` Metropolis transitions.

    Deterministic given the config seed; runs on the active kernel lane.
    """
    values = as_values(u)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if kernel.n != values.size:
        raise ValueError("kernel size does not match the utility table")
    mu = config.initial_distribution
    if mu is None:
        mu = rng.uniform_distribution(values.size)
    elif mu.size != values.size:
        raise ValueError("initial distribution does not match the utility table")
    bg = rng.bit_generator(config.seed)
    states = _kernels.metropolis_chain(
        bg,
        values,
        float(config.inverse_temperature),
        int(steps),
        mu,
        kernel.cumulative_rows(),
    )
    return Trajectory(states=states, n_actions=values.size)


def empirical_frequency(trajectory: Trajectory) -> np.ndarray:
    """Visit frequency of each action along a trajectory."""
    counts = np.bincount(trajectory.states, minlength=trajectory.n_actions)
    return counts / trajectory.states.size


def total_variation(p, q) -> float:
    """Total variation distance between two probability vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("distributions must share the same action space")
    return 0.5 * float(np.abs(p - q).sum())
