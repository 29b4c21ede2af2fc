"""Euclidean TSP with stochastic travel times.

Cities live in the unit square; the mean travel time of a leg is the
Euclidean distance, and a traversal realizes that mean scaled by
multiplicative uniform noise. The known-time solver sees the means, the
learning solver sees only per-leg running means of realized times.

Tours are cyclic; the canonical form starts at city 0 and runs in the
direction whose next city has the smaller index, so configuration
identity checks are literal equality.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator

from . import _kernels, rng
from .schedule import AnnealingSchedule, StopRule

INSTANCE_SCHEMA_VERSION = 1
BRUTE_FORCE_LIMIT = 10


@dataclass(frozen=True, eq=False)
class TspInstance:
    """City coordinates in [0, 1]^2; mean leg times are Euclidean."""

    cities: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        pts = np.asarray(self.cities, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
            raise ValueError("need at least 3 cities with (x, y) coordinates")
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise ValueError("coordinates must lie in the unit square")
        object.__setattr__(self, "cities", pts)
        diff = pts[:, None, :] - pts[None, :, :]
        object.__setattr__(self, "_dist", np.sqrt((diff * diff).sum(axis=2)))

    @property
    def n(self) -> int:
        return self.cities.shape[0]

    def mean_time(self, i: int, j: int) -> float:
        return float(self._dist[i, j])

    def distance_matrix(self) -> np.ndarray:
        return self._dist


@dataclass(frozen=True)
class Tour:
    """A cyclic visiting order in canonical form."""

    order: tuple[int, ...]

    def __init__(self, order):
        order = tuple(int(v) for v in order)
        n = len(order)
        if n < 3 or sorted(order) != list(range(n)):
            raise ValueError("tour must be a permutation of 0..n-1 with n >= 3")
        object.__setattr__(self, "order", _canonical(order))

    @property
    def n(self) -> int:
        return len(self.order)

    def legs(self):
        """The n cyclic (i, j) legs of the tour."""
        o = self.order
        return [(o[k], o[(k + 1) % len(o)]) for k in range(len(o))]


def _canonical(order: tuple[int, ...]) -> tuple[int, ...]:
    n = len(order)
    start = order.index(0)
    rotated = order[start:] + order[:start]
    if rotated[1] > rotated[-1]:
        rotated = (0,) + tuple(reversed(rotated[1:]))
    return tuple(rotated)


@dataclass(frozen=True)
class TravelNoise:
    """Multiplicative uniform noise on [1 - half_width, 1 + half_width].

    Mean-preserving: a leg's expected realized time is its mean time.
    """

    half_width: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.half_width < 1.0:
            raise ValueError("half_width must lie in [0, 1)")


def generate_tsp(n: int, seed) -> TspInstance:
    """n i.i.d. uniform cities in the unit square; deterministic per seed."""
    if n < 3:
        raise ValueError("need at least 3 cities")
    from numpy.random import SeedSequence

    seed_echo = None if isinstance(seed, SeedSequence) else rng.check_seed(seed)
    gen = rng.generator(seed)
    return TspInstance(cities=gen.random((int(n), 2)), seed=seed_echo)


def tour_cost(instance: TspInstance, tour: Tour, cost_view=None) -> float:
    """Sum of the cost view over the tour's cyclic legs (means by default)."""
    view = instance.distance_matrix() if cost_view is None else np.asarray(cost_view, dtype=np.float64)
    if view.shape != (instance.n, instance.n):
        raise ValueError("cost view must be an n x n matrix")
    if tour.n != instance.n:
        raise ValueError("tour does not match the instance")
    total = 0.0
    for i, j in tour.legs():
        total += view[i, j]
    return float(total)


def two_opt_move(tour: Tour, gen: Generator) -> Tour:
    """Reverse the arc between two uniformly chosen non-adjacent cuts.

    Identity for tours of fewer than 4 cities (no such cuts exist).
    """
    n = tour.n
    if n < 4:
        return tour
    order = np.array(tour.order, dtype=np.int64)
    p = int(gen.random() * n)
    if p >= n:
        p = n - 1
    g = 2 + int(gen.random() * (n - 3))
    if g > n - 2:
        g = n - 2
    if p + g <= n:
        lo, hi = p, p + g
    else:
        lo, hi = p + g - n, p
    order[lo:hi] = order[lo:hi][::-1]
    return Tour(order)


def sample_leg(instance: TspInstance, noise: TravelNoise, i: int, j: int, gen: Generator) -> float:
    """One realized travel time for leg (i, j)."""
    if i == j:
        raise ValueError("a leg needs two distinct cities")
    factor = 1.0 + noise.half_width * (2.0 * gen.random() - 1.0)
    return float(instance.mean_time(i, j) * factor)


def brute_force_tsp(instance: TspInstance) -> tuple[Tour, float]:
    """Exact optimum by enumerating all (n-1)!/2 tours (oracle for tests)."""
    n = instance.n
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"refusing brute force over {n} cities (limit {BRUTE_FORCE_LIMIT})")
    dist = instance.distance_matrix()
    best_cost = math.inf
    best: tuple[int, ...] | None = None
    for perm in itertools.permutations(range(1, n)):
        if perm[0] > perm[-1]:
            continue  # each direction counted once
        total = dist[0, perm[0]] + dist[perm[-1], 0]
        for a, b in zip(perm, perm[1:]):
            total += dist[a, b]
        if total < best_cost:
            best_cost = total
            best = (0,) + perm
    return Tour(best), float(best_cost)


@dataclass(eq=False)
class TspRunResult:
    """One annealing run on a TSP instance, scored under mean times."""

    final_tour: Tour
    best_tour: Tour
    final_true_cost: float
    best_true_cost: float
    final_estimated_cost: float | None
    iterations_used: int
    frozen: bool
    leg_estimates: np.ndarray | None
    leg_counts: np.ndarray | None

    @property
    def unobserved_legs(self) -> int | None:
        if self.leg_counts is None:
            return None
        iu = np.triu_indices(self.leg_counts.shape[0], k=1)
        return int(np.count_nonzero(self.leg_counts[iu] == 0))


def anneal(
    instance: TspInstance,
    schedule: AnnealingSchedule,
    stop: StopRule,
    seed: int,
    *,
    estimate_costs: bool = False,
    noise: TravelNoise | None = None,
    prior: float = 0.5,
) -> TspRunResult:
    """Anneal 2-opt reversals from the identity tour.

    With ``estimate_costs`` the acceptance delta reads per-leg running
    means, and every leg of the realized tour is observed each step under
    the travel noise; mean times are used for scoring only.
    """
    if instance.n < 4:
        raise ValueError("annealing needs at least 4 cities")
    if noise is None:
        noise = TravelNoise()
    betas = schedule.beta_steps(stop.max_iterations)
    init_order = np.arange(instance.n, dtype=np.int64)
    (
        order,
        iterations,
        froze,
        final_view_cost,
        final_true_cost,
        best_order,
        best_true_cost,
        est,
        counts,
    ) = _kernels.tsp_anneal(
        rng.bit_generator(seed),
        instance.distance_matrix(),
        init_order,
        betas,
        int(stop.freeze_window),
        bool(estimate_costs),
        float(noise.half_width),
        float(prior),
    )
    return TspRunResult(
        final_tour=Tour(order),
        best_tour=Tour(best_order),
        final_true_cost=float(final_true_cost),
        best_true_cost=float(best_true_cost),
        final_estimated_cost=float(final_view_cost) if estimate_costs else None,
        iterations_used=int(iterations),
        frozen=bool(froze),
        leg_estimates=est,
        leg_counts=counts,
    )


def to_json_dict(instance: TspInstance) -> dict:
    return {
        "schema_version": INSTANCE_SCHEMA_VERSION,
        "problem": "tsp",
        "cities": [[float(x), float(y)] for x, y in instance.cities],
        "seed": instance.seed,
    }


def from_json_dict(d: dict) -> TspInstance:
    if d.get("problem") != "tsp":
        raise ValueError("not a TSP instance")
    return TspInstance(cities=np.array(d["cities"], dtype=np.float64), seed=d.get("seed"))


def save(instance: TspInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(instance), fh, indent=2)
        fh.write("\n")


def load(path) -> TspInstance:
    with open(path, encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))
