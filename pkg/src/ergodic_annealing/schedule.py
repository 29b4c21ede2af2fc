"""Annealing schedules, stopping rules and the annealing driver.

A schedule pairs step thresholds t_k with inverse temperatures beta_k:
the chain runs at beta_0 until t_0, then at beta_{k+1} on [t_k, t_{k+1}).
The classic geometric form uses t_k = (k + 1) * L and
beta_k = (1 + rho)^k * beta_0; it is realized lazily, never materializing
the infinite sequence.

The driver layers best-ever tracking and a freeze stopping rule (the
state unchanged for a fixed number of consecutive steps) on top of the
Metropolis step.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.random import Generator

from . import rng
from .chain import ProposalKernel, as_values


@dataclass(frozen=True)
class AnnealingSchedule:
    """Step thresholds and inverse temperatures, lazy when geometric.

    Exactly one of the two parameterizations is set: ``(beta0, rho,
    loop_length)`` for the geometric family, or an explicit finite
    ``checkpoints`` prefix ``((t_0, beta_0), (t_1, beta_1), ...)`` whose
    last inverse temperature is held beyond the prefix.
    """

    beta0: float
    rho: float | None = None
    loop_length: int | None = None
    checkpoints: tuple[tuple[int, float], ...] | None = None

    def __post_init__(self):
        if not (math.isfinite(self.beta0) and self.beta0 > 0):
            raise ValueError("beta0 must be positive and finite")
        geometric = self.rho is not None or self.loop_length is not None
        if geometric == (self.checkpoints is not None):
            raise ValueError("specify either (rho, loop_length) or checkpoints")
        if geometric:
            if self.rho is None or not (math.isfinite(self.rho) and self.rho > 0):
                raise ValueError("rho must be strictly positive")
            if self.loop_length is None or self.loop_length < 1:
                raise ValueError("loop_length must be a positive integer")
        else:
            if self.checkpoints[0][1] != self.beta0:
                raise ValueError("first checkpoint must carry beta0")
            ts = [t for t, _ in self.checkpoints]
            bs = [b for _, b in self.checkpoints]
            if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])) or ts[0] < 1:
                raise ValueError("thresholds must be strictly increasing positive integers")
            if any(b2 <= b1 for b1, b2 in zip(bs, bs[1:])) or any(b <= 0 for b in bs):
                raise ValueError("inverse temperatures must be strictly increasing and positive")

    @classmethod
    def geometric(cls, beta0: float, rho: float, loop_length: int) -> "AnnealingSchedule":
        return cls(beta0=float(beta0), rho=float(rho), loop_length=int(loop_length))

    @classmethod
    def explicit(cls, checkpoints) -> "AnnealingSchedule":
        checkpoints = tuple((int(t), float(b)) for t, b in checkpoints)
        if not checkpoints:
            raise ValueError("checkpoints must be non-empty")
        return cls(beta0=checkpoints[0][1], checkpoints=checkpoints)

    def beta_at(self, n: int) -> float:
        """Inverse temperature governing the transition at step index n."""
        if n < 0:
            raise ValueError("step index must be non-negative")
        if self.checkpoints is None:
            return self.beta0 * (1.0 + self.rho) ** (n // self.loop_length)
        k = bisect_right([t for t, _ in self.checkpoints], n)
        k = min(k, len(self.checkpoints) - 1)
        return self.checkpoints[k][1]

    def beta_steps(self, length: int) -> np.ndarray:
        """Per-step inverse temperatures for the first ``length`` steps."""
        if self.checkpoints is None:
            blocks = -(-length // self.loop_length)
            levels = np.array(
                [self.beta0 * (1.0 + self.rho) ** k for k in range(blocks)], dtype=np.float64
            )
            return np.repeat(levels, self.loop_length)[:length]
        ts = np.array([t for t, _ in self.checkpoints], dtype=np.int64)
        bs = np.array([b for _, b in self.checkpoints], dtype=np.float64)
        idx = np.minimum(np.searchsorted(ts, np.arange(length), side="right"), ts.size - 1)
        return bs[idx]


def geometric_schedule(beta0: float, rho: float, loop_length: int) -> AnnealingSchedule:
    """Geometric schedule: t_k = (k + 1) * L, beta_k = (1 + rho)^k * beta0."""
    return AnnealingSchedule.geometric(beta0, rho, loop_length)


def beta_at(schedule: AnnealingSchedule, n: int) -> float:
    return schedule.beta_at(n)


@dataclass(frozen=True)
class StopRule:
    """Iteration cap plus freeze window (consecutive unchanged steps)."""

    max_iterations: int
    freeze_window: int = 2000

    def __post_init__(self):
        if self.max_iterations < 1 or self.freeze_window < 1:
            raise ValueError("max_iterations and freeze_window must be positive")


def frozen(recent_states, freeze_window: int) -> bool:
    """True iff a full window of freeze_window + 1 trailing states is identical."""
    states = list(recent_states)
    if len(states) < freeze_window + 1:
        return False
    tail = states[-(freeze_window + 1):]
    return all(s == tail[0] for s in tail)


@dataclass(eq=False)
class AnnealResult:
    """Outcome of one annealing run over a finite action space."""

    final_state: Any
    final_value: float
    best_state: Any
    best_value: float
    iterations_used: int
    frozen: bool
    trace: list[tuple[Any, float, bool]] | None = None


def simulated_annealing(
    u,
    kernel: ProposalKernel,
    schedule: AnnealingSchedule,
    stop: StopRule,
    seed: int,
    mu: np.ndarray | None = None,
    record_trace: bool = False,
) -> AnnealResult:
    """Metropolis under a rising-beta schedule, stopping at freeze or cap.

    The candidate maximizer is the final state; the best state ever
    visited is tracked alongside as a diagnostic. Deterministic given the
    seed, and with a constant schedule the visited states coincide with a
    plain Metropolis chain run from the same seed.
    """
    values = as_values(u)
    n = values.size
    if kernel.n != n:
        raise ValueError("kernel size does not match the utility table")
    if mu is None:
        mu = rng.uniform_distribution(n)
    gen = Generator(rng.bit_generator(seed))
    a = _scan_initial(gen.random(), mu)
    best = a
    best_value = values[a]
    trace: list[tuple[int, float, bool]] | None = [] if record_trace else None
    unchanged = 0
    iterations = 0
    froze = False
    for t in range(stop.max_iterations):
        beta = schedule.beta_at(t)
        b = kernel.sample(a, gen.random())
        du = values[b] - values[a]
        accepted = du >= 0.0 or gen.random() < math.exp(beta * du)
        nxt = b if accepted else a
        if trace is not None:
            trace.append((nxt, beta, accepted))
        if values[nxt] > best_value:
            best = nxt
            best_value = values[nxt]
        state_changed = nxt != a
        a = nxt
        iterations = t + 1
        if state_changed:
            unchanged = 0
        else:
            unchanged += 1
            if unchanged >= stop.freeze_window:
                froze = True
                break
    return AnnealResult(
        final_state=int(a),
        final_value=float(values[a]),
        best_state=int(best),
        best_value=float(best_value),
        iterations_used=iterations,
        frozen=froze,
        trace=trace,
    )


def _scan_initial(x: float, mu: np.ndarray) -> int:
    cum = 0.0
    for i in range(mu.size - 1):
        cum += mu[i]
        if x < cum:
            return i
    return mu.size - 1
