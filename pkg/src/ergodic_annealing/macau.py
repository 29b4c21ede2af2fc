"""Metropolis on learned payoffs: the Macau kernel and ergodic annealing.

When the payoff function is unknown, each action's value is estimated by
the running empirical mean of the payoffs observed when that action was
played, seeded by an ex ante prior that the first observation replaces
outright. The Macau step runs the Metropolis acceptance rule on the
current estimates and then observes one payoff realization for the state
it lands in (kept or newly accepted). Ergodic annealing is simulated
annealing with this step in place of the known-payoff one.

Two estimator granularities are provided: per-action (tabular) and
per-component (decomposed), the latter summing component estimates into
configuration values for the structured problems whose configuration
spaces are far too large to tabulate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.random import Generator

from . import _kernels, rng
from ._kernels import ENV_ADDITIVE, ENV_DETERMINISTIC, ENV_MULTIPLICATIVE
from .chain import (
    FiniteActionSpace,
    ProposalKernel,
    Trajectory,
    UniformProposal,
    empirical_frequency,
    gibbs_distribution,
    total_variation,
)
from .schedule import AnnealingSchedule, StopRule

CONJECTURE_SCHEMA_VERSION = 1
_MAX_CONJECTURE_ACTIONS = 12


class TabularEstimator:
    """Per-action running means with visit counts and an ex ante prior.

    An action with count zero reports its prior; after that it reports
    exactly the mean of its observed payoffs (the prior has no weight).
    """

    def __init__(self, prior, n_actions: int | None = None):
        if np.isscalar(prior):
            if n_actions is None:
                raise ValueError("scalar prior needs n_actions")
            prior = np.full(int(n_actions), float(prior))
        self.prior = np.array(prior, dtype=np.float64)
        if self.prior.ndim != 1 or not np.all(np.isfinite(self.prior)):
            raise ValueError("prior must be a finite vector")
        self.estimates = self.prior.copy()
        self.counts = np.zeros(self.prior.size, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.prior.size

    def update(self, action: int, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError("observations must be finite")
        c = self.counts[action] + 1
        self.counts[action] = c
        self.estimates[action] = ((c - 1.0) / c) * self.estimates[action] + value / c

    def value(self, action: int) -> float:
        return float(self.estimates[action])


class DecomposedEstimator:
    """Per-component running means; a configuration is worth the sum of
    its components' estimates."""

    def __init__(self, prior, n_components: int | None = None):
        if np.isscalar(prior):
            if n_components is None:
                raise ValueError("scalar prior needs n_components")
            prior = np.full(int(n_components), float(prior))
        self.prior = np.array(prior, dtype=np.float64)
        if self.prior.ndim != 1 or not np.all(np.isfinite(self.prior)):
            raise ValueError("prior must be a finite vector")
        self.estimates = self.prior.copy()
        self.counts = np.zeros(self.prior.size, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.prior.size

    def update(self, component: int, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError("observations must be finite")
        c = self.counts[component] + 1
        self.counts[component] = c
        self.estimates[component] = ((c - 1.0) / c) * self.estimates[component] + value / c

    def update_many(self, components, values) -> None:
        for comp, val in zip(components, values, strict=True):
            self.update(comp, val)

    def config_value(self, components) -> float:
        total = 0.0
        for comp in components:
            total += self.estimates[comp]
        return float(total)

    def unobserved(self) -> int:
        """Number of components never observed (still carrying the prior)."""
        return int(np.count_nonzero(self.counts == 0))


def macau_update(estimator, chosen, observations) -> Any:
    """Fold observation(s) into the estimator and return it.

    Tabular form: one action index and one payoff. Decomposed form: a
    sequence of component ids and matching per-component observations.
    All other entries are left untouched.
    """
    if isinstance(estimator, TabularEstimator):
        estimator.update(int(chosen), float(observations))
    elif isinstance(estimator, DecomposedEstimator):
        estimator.update_many(chosen, observations)
    else:
        raise TypeError(f"unsupported estimator type: {type(estimator).__name__}")
    return estimator


class PayoffEnvironment:
    """A stream of i.i.d. payoff realizations per action.

    ``true_means`` is diagnostic: the evaluation harness may read it, the
    optimizing agent never does. Subclasses with a ``kernel_kind`` can be
    simulated by the compiled kernels.
    """

    kernel_kind: int | None = None
    half_width: float = 0.0
    true_means: np.ndarray | None = None

    def sample(self, action: int, gen: Generator) -> float:
        raise NotImplementedError


class DeterministicPayoff(PayoffEnvironment):
    """Zero-noise environment: every draw equals the mean (no rng use)."""

    kernel_kind = ENV_DETERMINISTIC

    def __init__(self, means):
        self.true_means = np.asarray(means, dtype=np.float64)

    def sample(self, action: int, gen: Generator) -> float:
        return float(self.true_means[action])


class AdditiveUniformPayoff(PayoffEnvironment):
    """mean + uniform noise on [-half_width, half_width]."""

    kernel_kind = ENV_ADDITIVE

    def __init__(self, means, half_width: float):
        self.true_means = np.asarray(means, dtype=np.float64)
        if not 0.0 <= half_width < math.inf:
            raise ValueError("half_width must be non-negative")
        self.half_width = float(half_width)

    def sample(self, action: int, gen: Generator) -> float:
        return float(self.true_means[action] + self.half_width * (2.0 * gen.random() - 1.0))


class MultiplicativeUniformPayoff(PayoffEnvironment):
    """mean * uniform factor on [1 - half_width, 1 + half_width]."""

    kernel_kind = ENV_MULTIPLICATIVE

    def __init__(self, means, half_width: float):
        self.true_means = np.asarray(means, dtype=np.float64)
        if not 0.0 <= half_width < 1.0:
            raise ValueError("half_width must lie in [0, 1)")
        self.half_width = float(half_width)

    def sample(self, action: int, gen: Generator) -> float:
        return float(
            self.true_means[action] * (1.0 + self.half_width * (2.0 * gen.random() - 1.0))
        )


def macau_step(
    current: int,
    estimator: TabularEstimator,
    env: PayoffEnvironment,
    beta: float,
    kernel: ProposalKernel,
    gen: Generator,
) -> tuple[int, TabularEstimator]:
    """One Macau transition: accept on estimates, then observe and update.

    The payoff of the realized next state is observed whether the
    proposal was accepted or the incumbent retained; exactly one
    observation per step.
    """
    est = estimator.estimates
    b = kernel.sample(current, gen.random())
    du = est[b] - est[current]
    if du >= 0.0 or gen.random() < math.exp(beta * du):
        nxt = b
    else:
        nxt = current
    estimator.update(nxt, env.sample(nxt, gen))
    return nxt, estimator


@dataclass(eq=False)
class MacauAnnealResult:
    """Outcome of an ergodic-annealing run on a finite action space."""

    final_state: int
    final_estimated_value: float
    final_true_value: float | None
    best_state: int
    best_value: float
    best_value_basis: str  # "true" when the environment exposes means, else "estimated"
    iterations_used: int
    frozen: bool
    trace: list[tuple[int, float, bool]] | None = None


def ergodic_annealing(
    problem,
    schedule: AnnealingSchedule,
    stop: StopRule,
    seed: int,
    *,
    env: PayoffEnvironment | None = None,
    estimator: TabularEstimator | None = None,
    kernel: ProposalKernel | None = None,
    mu: np.ndarray | None = None,
    prior: float = 0.5,
    noise=None,
    record_trace: bool = False,
):
    """Simulated annealing with the Macau step in place of Metropolis.

    Dispatches on the problem: a finite action space (``env`` required,
    tabular estimator) runs here; a layered Steiner instance or a TSP
    instance is routed to its problem module with a decomposed per-edge /
    per-leg estimator. Returns ``(MacauAnnealResult, TabularEstimator)``
    for action spaces, the problem module's run record otherwise.
    """
    from . import steiner, tsp  # runtime import keeps the plug-ins optional here

    if isinstance(problem, steiner.LayeredDag):
        if env is not None or estimator is not None or kernel is not None:
            raise ValueError("Steiner instances carry their own environment and moves")
        return steiner.anneal(
            problem, schedule, stop, seed, estimate_costs=True, prior=prior
        )
    if isinstance(problem, tsp.TspInstance):
        if env is not None or estimator is not None or kernel is not None:
            raise ValueError("TSP instances carry their own environment and moves")
        return tsp.anneal(
            problem, schedule, stop, seed, estimate_costs=True, noise=noise, prior=prior
        )
    if not isinstance(problem, FiniteActionSpace):
        raise TypeError(f"unsupported problem type: {type(problem).__name__}")

    if env is None:
        raise ValueError("an environment is required for a finite action space")
    n = problem.n
    if estimator is None:
        estimator = TabularEstimator(prior, n)
    if estimator.n != n:
        raise ValueError("estimator size does not match the action space")
    if kernel is None:
        kernel = UniformProposal(n)
    if mu is None:
        mu = rng.uniform_distribution(n)

    gen = Generator(rng.bit_generator(seed))
    a = _scan_initial(gen.random(), mu)
    means = env.true_means
    track_true = means is not None
    best = a
    best_value = float(means[a]) if track_true else float(estimator.estimates[a])
    trace: list | None = [] if record_trace else None
    unchanged = 0
    iterations = 0
    froze = False
    est = estimator.estimates
    for t in range(stop.max_iterations):
        beta = schedule.beta_at(t)
        b = kernel.sample(a, gen.random())
        du = est[b] - est[a]
        accepted = du >= 0.0 or gen.random() < math.exp(beta * du)
        nxt = b if accepted else a
        estimator.update(nxt, env.sample(nxt, gen))
        if trace is not None:
            trace.append((nxt, beta, accepted))
        candidate = float(means[nxt]) if track_true else float(estimator.estimates[nxt])
        if candidate > best_value:
            best = nxt
            best_value = candidate
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
    result = MacauAnnealResult(
        final_state=int(a),
        final_estimated_value=float(estimator.estimates[a]),
        final_true_value=float(means[a]) if track_true else None,
        best_state=int(best),
        best_value=float(best_value),
        best_value_basis="true" if track_true else "estimated",
        iterations_used=iterations,
        frozen=froze,
        trace=trace,
    )
    return result, estimator


def conjecture_report(
    env: PayoffEnvironment,
    beta: float,
    steps: int,
    seed: int,
    *,
    replicas: int = 2000,
    replica_steps: int | None = None,
    prior: float = 0.5,
    kernel: ProposalKernel | None = None,
) -> dict:
    """Empirical check of the two Macau limit statements.

    ``tv_ergodic``: total variation between the visit frequency of one
    long Macau run and the Gibbs distribution of the *true* means.
    ``tv_asymptotic``: total variation between the distribution of the
    state at step ``replica_steps`` across independent replicas and the
    same Gibbs target.
    """
    means = env.true_means
    if means is None:
        raise ValueError("environment must expose true means for conjecture checks")
    if env.kernel_kind is None:
        raise ValueError("conjecture checks need an i.i.d. payoff family the kernels support")
    n = means.size
    if n > _MAX_CONJECTURE_ACTIONS:
        raise ValueError(f"conjecture checks support at most {_MAX_CONJECTURE_ACTIONS} actions")
    if replica_steps is None:
        replica_steps = steps
    if kernel is None:
        kernel = UniformProposal(n)
    qcum = kernel.cumulative_rows()
    mu = rng.uniform_distribution(n)
    prior_vec = np.full(n, float(prior))
    target = gibbs_distribution(means, beta)

    states, _, _ = _kernels.macau_chain(
        rng.bit_generator(seed, 0),
        prior_vec,
        means,
        float(beta),
        int(steps),
        mu,
        env.kernel_kind,
        env.half_width,
        qcum,
        True,
    )
    tv_ergodic = total_variation(
        empirical_frequency(Trajectory(states=states, n_actions=n)), target
    )

    finals = np.empty(int(replicas), dtype=np.int64)
    for r in range(int(replicas)):
        last, _, _ = _kernels.macau_chain(
            rng.bit_generator(seed, 1, r),
            prior_vec,
            means,
            float(beta),
            int(replica_steps),
            mu,
            env.kernel_kind,
            env.half_width,
            qcum,
            False,
        )
        finals[r] = last[0]
    hist = np.bincount(finals, minlength=n) / finals.size
    tv_asymptotic = total_variation(hist, target)

    return {
        "schema_version": CONJECTURE_SCHEMA_VERSION,
        "beta": float(beta),
        "steps": int(steps),
        "replicas": int(replicas),
        "replica_steps": int(replica_steps),
        "tv_ergodic": float(tv_ergodic),
        "tv_asymptotic": float(tv_asymptotic),
        "seed": int(seed),
        "n_actions": int(n),
        "noise": {"family": _family_name(env.kernel_kind), "half_width": float(env.half_width)},
        "prior": float(prior),
    }


def _family_name(kind: int) -> str:
    return {ENV_DETERMINISTIC: "deterministic", ENV_ADDITIVE: "additive", ENV_MULTIPLICATIVE: "multiplicative"}[kind]


def _scan_initial(x: float, mu: np.ndarray) -> int:
    cum = 0.0
    for i in range(mu.size - 1):
        cum += mu[i]
        if x < cum:
            return i
    return mu.size - 1
