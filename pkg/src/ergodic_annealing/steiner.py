"""Layered directed Steiner tree instances.

A layered DAG routes from a single root (layer 0) to a terminal layer,
every edge crossing exactly one layer boundary. A configuration selects a
subset of the intermediate (potential Steiner) vertices; its value is the
cost of the cheapest arborescence spanning root, selected vertices and
terminals inside the induced subgraph. On a layered DAG that arborescence
is exact per-vertex greed: every induced non-root vertex takes its
cheapest incoming edge from induced vertices, and a vertex with no such
edge makes the configuration infeasible.

Instances are generated layer by layer: sizes uniform on a given range,
one guaranteed incoming edge per vertex for feasibility, every other
consecutive-layer edge present independently with fixed probability, and
i.i.d. uniform (0, 1) edge costs.

Edge ids index the canonical edge order (grouped by head vertex), which
is also the estimator component key order for learned costs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.random import Generator, SeedSequence

from . import _kernels, rng
from .schedule import AnnealingSchedule, StopRule

INSTANCE_SCHEMA_VERSION = 1
BRUTE_FORCE_LIMIT = 20


class InfeasibleConfigurationError(ValueError):
    """Raised when a configuration's induced subgraph cannot be spanned."""


@dataclass(frozen=True)
class DstGenParams:
    """Generator knobs; defaults give 13 layers of at most 12 vertices."""

    num_layers: int = 13
    max_nodes_per_layer: int = 12
    min_nodes_per_layer: int = 2
    extra_edge_probability: float = 0.5

    def __post_init__(self):
        if self.num_layers < 3:
            raise ValueError("num_layers must be at least 3")
        if not 2 <= self.min_nodes_per_layer <= self.max_nodes_per_layer:
            raise ValueError("need 2 <= min_nodes_per_layer <= max_nodes_per_layer")
        if not 0.0 <= self.extra_edge_probability <= 1.0:
            raise ValueError("extra_edge_probability must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "num_layers": self.num_layers,
            "max_nodes_per_layer": self.max_nodes_per_layer,
            "min_nodes_per_layer": self.min_nodes_per_layer,
            "extra_edge_probability": self.extra_edge_probability,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DstGenParams":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class LayeredDag:
    """Immutable layered DAG with per-edge true costs in (0, 1).

    ``edges`` are (tail, head) pairs of flat vertex ids; the constructor
    canonicalizes them into head-grouped order, which defines edge ids.
    """

    layer_sizes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    costs: np.ndarray
    seed: int | None = None
    params: DstGenParams | None = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or sizes[0] != 1 or any(s < 1 for s in sizes):
            raise ValueError("layers must start with a singleton root and be non-empty")
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        n_vertices = int(offsets[-1])
        layer_of = np.empty(n_vertices, dtype=np.int64)
        for l, s in enumerate(sizes):
            layer_of[offsets[l]:offsets[l + 1]] = l

        edges = [(int(t), int(h)) for t, h in self.edges]
        costs = np.asarray(self.costs, dtype=np.float64)
        if len(edges) != costs.size:
            raise ValueError("edges and costs must align")
        if costs.size and not (np.all(costs > 0.0) and np.all(costs < 1.0)):
            raise ValueError("true costs must lie in (0, 1)")
        for t, h in edges:
            if not (0 <= t < n_vertices and 0 <= h < n_vertices):
                raise ValueError("edge endpoint out of range")
            if layer_of[h] != layer_of[t] + 1:
                raise ValueError("edges must connect consecutive layers")

        order = sorted(range(len(edges)), key=lambda e: (edges[e][1], e))
        edges = tuple(edges[e] for e in order)
        costs = costs[order] if len(edges) else costs

        in_deg = np.zeros(n_vertices, dtype=np.int64)
        for _, h in edges:
            in_deg[h] += 1
        if np.any(in_deg[1:] == 0):
            raise ValueError("every non-root vertex needs an incoming edge")

        in_ptr = np.concatenate([[0], np.cumsum(in_deg)]).astype(np.int64)
        in_src = np.fromiter((t for t, _ in edges), dtype=np.int64, count=len(edges))

        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "_layer_of", layer_of)
        object.__setattr__(self, "_in_ptr", in_ptr)
        object.__setattr__(self, "_in_src", in_src)

    @property
    def n_vertices(self) -> int:
        return int(self._offsets[-1])

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes)

    @property
    def root(self) -> int:
        return 0

    @property
    def terminals(self) -> np.ndarray:
        return np.arange(self._offsets[-2], self._offsets[-1], dtype=np.int64)

    @property
    def steiner_vertices(self) -> np.ndarray:
        """Flat ids of the potential Steiner vertices (layers 1..L-1)."""
        return np.arange(self._offsets[1], self._offsets[-2], dtype=np.int64)

    @property
    def size(self) -> int:
        """Number of potential Steiner vertices."""
        return int(self._offsets[-2] - self._offsets[1])

    def layer_of(self, vertex: int) -> int:
        return int(self._layer_of[vertex])

    def vertex_label(self, vertex: int) -> tuple[int, int]:
        """(layer, index-within-layer) label of a flat vertex id."""
        l = self.layer_of(vertex)
        return l, int(vertex - self._offsets[l])

    def flat_vertex(self, label: tuple[int, int]) -> int:
        l, i = label
        if not (0 <= l < self.n_layers and 0 <= i < self.layer_sizes[l]):
            raise ValueError(f"no vertex {label!r}")
        return int(self._offsets[l] + i)

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(in_ptr, in_src) of incoming edges per vertex, edge-id order."""
        return self._in_ptr, self._in_src


@dataclass(frozen=True)
class SteinerConfig:
    """A subset of a DAG's potential Steiner vertices (flat ids)."""

    selected: frozenset[int]

    def __init__(self, selected: Iterable[int]):
        object.__setattr__(self, "selected", frozenset(int(v) for v in selected))

    def canonical(self) -> tuple[int, ...]:
        return tuple(sorted(self.selected))

    def toggled(self, vertex: int) -> "SteinerConfig":
        if vertex in self.selected:
            return SteinerConfig(self.selected - {vertex})
        return SteinerConfig(self.selected | {vertex})


def _check_config(dag: LayeredDag, config: SteinerConfig) -> None:
    lo, hi = int(dag._offsets[1]), int(dag._offsets[-2])
    for v in config.selected:
        if not lo <= v < hi:
            raise ValueError(f"vertex {v} is not a potential Steiner vertex")


def _induced_mask(dag: LayeredDag, config: SteinerConfig) -> np.ndarray:
    induced = np.ones(dag.n_vertices, dtype=np.uint8)
    induced[dag.steiner_vertices] = 0
    if config.selected:
        induced[np.fromiter(config.selected, dtype=np.int64)] = 1
    return induced


def _evaluate(dag: LayeredDag, induced: np.ndarray, view: np.ndarray):
    """Greedy min-cost in-edge per induced vertex on the induced subgraph.

    Returns (feasible, total_cost, parent_edge_ids); ties take the first
    edge in canonical order.
    """
    in_ptr, in_src = dag.csr()
    parents = []
    total = 0.0
    for v in range(1, dag.n_vertices):
        if not induced[v]:
            continue
        best = math.inf
        best_e = -1
        for e in range(in_ptr[v], in_ptr[v + 1]):
            if induced[in_src[e]] and view[e] < best:
                best = view[e]
                best_e = e
        if best_e < 0:
            return False, 0.0, []
        parents.append(int(best_e))
        total += best
    return True, float(total), parents


@dataclass(frozen=True, eq=False)
class Arborescence:
    """Spanning arborescence of an induced subgraph: one in-edge per
    induced non-root vertex, no edge into the root."""

    edge_ids: tuple[int, ...]
    total_cost: float


def min_arborescence(dag: LayeredDag, config: SteinerConfig, cost_view=None):
    """Cheapest spanning arborescence of the induced subgraph, or None.

    ``cost_view`` assigns a finite cost per edge id (true costs by
    default; learned estimates for the unknown-cost agent). Returns None
    when some induced non-root vertex has no incoming edge from induced
    vertices.
    """
    _check_config(dag, config)
    view = dag.costs if cost_view is None else np.asarray(cost_view, dtype=np.float64)
    if view.shape != (dag.n_edges,):
        raise ValueError("cost view must assign one cost per edge")
    if not np.all(np.isfinite(view)):
        raise ValueError("cost view must be finite")
    feasible, total, parents = _evaluate(dag, _induced_mask(dag, config), view)
    if not feasible:
        return None
    return Arborescence(edge_ids=tuple(parents), total_cost=total)


def dst_objective(dag: LayeredDag, config: SteinerConfig, cost_view=None) -> float:
    """Configuration cost (to minimize); the annealer maximizes its negation.

    Raises InfeasibleConfigurationError for infeasible configurations;
    the annealers never evaluate those (infeasible moves are rejected
    before the acceptance test).
    """
    tree = min_arborescence(dag, config, cost_view)
    if tree is None:
        raise InfeasibleConfigurationError("configuration does not span the terminals")
    return tree.total_cost


def toggle_move(config: SteinerConfig, dag: LayeredDag, gen: Generator) -> SteinerConfig:
    """Flip one uniformly chosen potential Steiner vertex.

    The induced proposal kernel is symmetric and irreducible over the
    2^S configuration hypercube.
    """
    sv = dag.steiner_vertices
    if sv.size == 0:
        raise ValueError("graph has no potential Steiner vertices")
    pos = int(gen.random() * sv.size)
    if pos >= sv.size:
        pos = sv.size - 1
    return config.toggled(int(sv[pos]))


def brute_force_dst(dag: LayeredDag) -> tuple[SteinerConfig, float]:
    """Exhaustive optimum over all Steiner subsets (oracle for tests)."""
    sv = dag.steiner_vertices
    if sv.size > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"refusing brute force over {sv.size} Steiner vertices (limit {BRUTE_FORCE_LIMIT})"
        )
    induced = np.ones(dag.n_vertices, dtype=np.uint8)
    best_cost = math.inf
    best_mask = -1
    for mask in range(1 << sv.size):
        for pos in range(sv.size):
            induced[sv[pos]] = (mask >> pos) & 1
        feasible, total, _ = _evaluate(dag, induced, dag.costs)
        if feasible and total < best_cost:
            best_cost = total
            best_mask = mask
    if best_mask < 0:
        raise ValueError("no feasible configuration exists")
    selected = [int(sv[pos]) for pos in range(sv.size) if (best_mask >> pos) & 1]
    return SteinerConfig(selected), float(best_cost)


def generate_dst(params: DstGenParams, seed) -> LayeredDag:
    """Random layered instance; deterministic given the seed.

    Per non-root vertex one parent in the previous layer is chosen
    uniformly and connected; every other consecutive-layer pair is edged
    independently with ``extra_edge_probability``; costs are i.i.d.
    uniform on (0, 1).
    """
    seed_echo = None if isinstance(seed, SeedSequence) else rng.check_seed(seed)
    gen = rng.generator(seed)

    n_random_layers = params.num_layers - 1
    lo, hi = params.min_nodes_per_layer, params.max_nodes_per_layer
    sizes = [1]
    for _ in range(n_random_layers):
        k = lo + int(gen.random() * (hi - lo + 1))
        sizes.append(min(k, hi))

    offsets = np.concatenate([[0], np.cumsum(sizes)])
    edges: list[tuple[int, int]] = []
    costs: list[float] = []
    for l in range(1, params.num_layers):
        prev_lo, prev_n = int(offsets[l - 1]), sizes[l - 1]
        for v in range(int(offsets[l]), int(offsets[l + 1])):
            parent = int(gen.random() * prev_n)
            if parent >= prev_n:
                parent = prev_n - 1
            for p in range(prev_n):
                if p == parent:
                    present = True
                else:
                    present = gen.random() < params.extra_edge_probability
                if present:
                    c = gen.random()
                    while c == 0.0:
                        c = gen.random()
                    edges.append((prev_lo + p, v))
                    costs.append(c)

    return LayeredDag(
        layer_sizes=tuple(sizes),
        edges=tuple(edges),
        costs=np.array(costs),
        seed=seed_echo,
        params=params,
    )


@dataclass(eq=False)
class DstRunResult:
    """One annealing run on a layered instance, scored under true costs."""

    final_config: SteinerConfig
    best_config: SteinerConfig
    final_true_cost: float
    best_true_cost: float
    final_estimated_cost: float | None
    iterations_used: int
    frozen: bool
    edge_estimates: np.ndarray | None
    edge_counts: np.ndarray | None

    @property
    def unobserved_edges(self) -> int | None:
        if self.edge_counts is None:
            return None
        return int(np.count_nonzero(self.edge_counts == 0))


def anneal(
    dag: LayeredDag,
    schedule: AnnealingSchedule,
    stop: StopRule,
    seed: int,
    *,
    estimate_costs: bool = False,
    prior: float = 0.5,
) -> DstRunResult:
    """Anneal Steiner-node toggles from the all-selected configuration.

    With ``estimate_costs`` the acceptance rule sees only per-edge running
    means (prior until first observation); true costs are used for
    scoring. Without it this is plain simulated annealing on true costs.
    """
    if dag.size < 1:
        raise ValueError("graph has no potential Steiner vertices")
    in_ptr, in_src = dag.csr()
    betas = schedule.beta_steps(stop.max_iterations)
    init_sel = np.ones(dag.size, dtype=np.uint8)
    (
        sel,
        iterations,
        froze,
        final_view_cost,
        final_true_cost,
        best_sel,
        best_true_cost,
        est,
        counts,
    ) = _kernels.dst_anneal(
        rng.bit_generator(seed),
        in_ptr,
        in_src,
        dag.costs,
        dag.steiner_vertices,
        init_sel,
        betas,
        int(stop.freeze_window),
        bool(estimate_costs),
        float(prior),
    )
    sv = dag.steiner_vertices
    final_config = SteinerConfig(int(v) for v, s in zip(sv, sel) if s)
    best_config = SteinerConfig(int(v) for v, s in zip(sv, best_sel) if s)
    return DstRunResult(
        final_config=final_config,
        best_config=best_config,
        final_true_cost=float(final_true_cost),
        best_true_cost=float(best_true_cost),
        final_estimated_cost=float(final_view_cost) if estimate_costs else None,
        iterations_used=int(iterations),
        frozen=bool(froze),
        edge_estimates=est,
        edge_counts=counts,
    )


def to_json_dict(dag: LayeredDag) -> dict:
    layers = []
    for l, s in enumerate(dag.layer_sizes):
        layers.append([list(dag.vertex_label(dag.flat_vertex((l, i)))) for i in range(s)])
    return {
        "schema_version": INSTANCE_SCHEMA_VERSION,
        "problem": "dst",
        "layers": layers,
        "edges": [
            {
                "tail": list(dag.vertex_label(t)),
                "head": list(dag.vertex_label(h)),
                "cost": float(c),
            }
            for (t, h), c in zip(dag.edges, dag.costs)
        ],
        "seed": dag.seed,
        "params": dag.params.to_dict() if dag.params is not None else None,
    }


def from_json_dict(d: dict) -> LayeredDag:
    if d.get("problem") != "dst":
        raise ValueError("not a layered Steiner instance")
    layer_sizes = tuple(len(layer) for layer in d["layers"])
    offsets = np.concatenate([[0], np.cumsum(layer_sizes)])

    def flat(label) -> int:
        l, i = int(label[0]), int(label[1])
        return int(offsets[l] + i)

    edges = tuple((flat(e["tail"]), flat(e["head"])) for e in d["edges"])
    costs = np.array([float(e["cost"]) for e in d["edges"]])
    params = DstGenParams.from_dict(d["params"]) if d.get("params") else None
    return LayeredDag(
        layer_sizes=layer_sizes, edges=edges, costs=costs, seed=d.get("seed"), params=params
    )


def save(dag: LayeredDag, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(dag), fh, indent=2)
        fh.write("\n")


def load(path) -> LayeredDag:
    with open(path, encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))
