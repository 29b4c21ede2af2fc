"""Benchmark harness: known-cost vs learned-cost annealing, head to head.

For every instance of a sweep, one solver anneals with the true costs in
hand and one learns them from observations; both share the instance, the
schedule and the stopping rule but own independent random streams. The
learner's final configuration is scored under the true costs. The report
carries per-instance records plus the agreement count (identical
canonical final configurations), the mean pairwise deviation and the
count of instances where the learner did at least as well.

Reports serialize to JSON and CSV. Serialized reports are byte-identical
for identical (config, master seed); wall times are measured and kept on
the in-memory records but excluded from serialization unless explicitly
requested, precisely to preserve that reproducibility.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.random import SeedSequence

from . import macau, rng, steiner, tsp
from .chain import FiniteActionSpace, UniformProposal
from .macau import AdditiveUniformPayoff, MultiplicativeUniformPayoff
from .schedule import AnnealingSchedule, StopRule, simulated_annealing

REPORT_SCHEMA_VERSION = 1
CONFIG_SCHEMA_VERSION = 1

ROLE_GEN, ROLE_SA, ROLE_EA = 0, 1, 2

CSV_COLUMNS = ("instance_id", "size", "sa_cost", "ea_cost", "agree", "deviation", "sa_iters", "ea_iters")


class ConfigError(ValueError):
    """Invalid experiment configuration or config file."""


_CONFIG_FIELDS: dict[str, type] = {
    "schema_version": int,
    "problem": str,
    "instance_count": int,
    "master_seed": int,
    # layered Steiner generator
    "num_layers": int,
    "min_nodes_per_layer": int,
    "max_nodes_per_layer": int,
    "extra_edge_probability": float,
    # TSP generator / environment
    "min_cities": int,
    "max_cities": int,
    "noise_half_width": float,
    # abstract action-space generator / environment
    "num_actions": int,
    "noise_family": str,
    # schedule
    "beta0": float,
    "rho": float,
    "loop_length_factor": int,
    "loop_length": int,
    # stopping
    "max_iterations": int,
    "freeze_window": int,
    # estimation
    "prior": float,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one benchmark sweep."""

    problem: str
    instance_count: int = 10
    master_seed: int = 0
    num_layers: int = 13
    min_nodes_per_layer: int = 2
    max_nodes_per_layer: int = 12
    extra_edge_probability: float = 0.5
    min_cities: int = 30
    max_cities: int = 90
    noise_half_width: float = 0.5
    num_actions: int = 12
    noise_family: str = "additive"
    beta0: float = 1.0
    rho: float = 0.05
    loop_length_factor: int = 50
    loop_length: int = 0
    max_iterations: int = 400_000
    freeze_window: int = 2000
    prior: float = 0.5
    schema_version: int = CONFIG_SCHEMA_VERSION

    def __post_init__(self):
        if self.problem not in ("dst", "tsp", "abstract"):
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.instance_count < 1:
            raise ConfigError("instance_count must be positive")
        try:
            rng.check_seed(self.master_seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.problem == "dst":
            try:
                self.dst_params()
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if self.problem == "tsp":
            if not 4 <= self.min_cities <= self.max_cities:
                raise ConfigError("need 4 <= min_cities <= max_cities")
            if not 0.0 <= self.noise_half_width < 1.0:
                raise ConfigError("noise_half_width must lie in [0, 1)")
        if self.problem == "abstract":
            if self.num_actions < 2:
                raise ConfigError("num_actions must be at least 2")
            if self.noise_family not in ("additive", "multiplicative"):
                raise ConfigError(f"unknown noise_family {self.noise_family!r}")
        if not (math.isfinite(self.beta0) and self.beta0 > 0):
            raise ConfigError("beta0 must be positive")
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise ConfigError("rho must be strictly positive")
        if self.loop_length < 0 or (self.loop_length == 0 and self.loop_length_factor < 1):
            raise ConfigError("loop_length (or loop_length_factor) must be positive")
        if self.max_iterations < 1 or self.freeze_window < 1:
            raise ConfigError("max_iterations and freeze_window must be positive")
        if not math.isfinite(self.prior):
            raise ConfigError("prior must be finite")

    def dst_params(self) -> steiner.DstGenParams:
        return steiner.DstGenParams(
            num_layers=self.num_layers,
            max_nodes_per_layer=self.max_nodes_per_layer,
            min_nodes_per_layer=self.min_nodes_per_layer,
            extra_edge_probability=self.extra_edge_probability,
        )

    def schedule_for(self, size: int) -> AnnealingSchedule:
        loop = self.loop_length if self.loop_length > 0 else self.loop_length_factor * size
        return AnnealingSchedule.geometric(self.beta0, self.rho, loop)

    def stop_rule(self) -> StopRule:
        return StopRule(max_iterations=self.max_iterations, freeze_window=self.freeze_window)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in _CONFIG_FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(_CONFIG_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "problem" not in d:
            raise ConfigError("config must set 'problem'")
        coerced: dict[str, Any] = {}
        for key, value in d.items():
            typ = _CONFIG_FIELDS[key]
            try:
                coerced[key] = typ(value)
            except (TypeError, ValueError):
                raise ConfigError(f"config key {key!r} expects {typ.__name__}, got {value!r}") from None
        return cls(**coerced)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        values: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, value = line.partition("=")
                key = key.strip()
                value = value.split("#", 1)[0].strip()
                if key in values:
                    raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
                values[key] = value
        return cls.from_dict(values)


def deviation(cost_a: float, cost_b: float) -> float:
    """Relative gap to the better (lower) of two positive costs."""
    if not (math.isfinite(cost_a) and math.isfinite(cost_b)):
        raise ValueError("costs must be finite")
    if cost_a <= 0.0 or cost_b <= 0.0:
        raise ValueError("deviation is defined for positive costs")
    return abs(cost_a - cost_b) / min(cost_a, cost_b)


def instance_seed(master_seed: int, index: int) -> int:
    """64-bit instance seed derived per index (not sequentially)."""
    ss = SeedSequence(rng.check_seed(master_seed), spawn_key=(int(index), ROLE_GEN))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(eq=False)
class InstanceRecord:
    instance_id: int
    size: int | None = None
    sa_cost: float | None = None
    ea_cost: float | None = None
    agree: bool | None = None
    deviation: float | None = None
    sa_iters: int | None = None
    ea_iters: int | None = None
    sa_frozen: bool | None = None
    ea_frozen: bool | None = None
    ea_estimated_cost: float | None = None
    unobserved_components: int | None = None
    components_total: int | None = None
    error: str | None = None
    wall_time_s: float | None = None

    def to_json_dict(self, include_timings: bool = False) -> dict:
        d = {
            "instance_id": self.instance_id,
            "size": self.size,
            "sa_cost": self.sa_cost,
            "ea_cost": self.ea_cost,
            "agree": self.agree,
            "deviation": self.deviation,
            "sa_iters": self.sa_iters,
            "ea_iters": self.ea_iters,
            "sa_frozen": self.sa_frozen,
            "ea_frozen": self.ea_frozen,
            "ea_estimated_cost": self.ea_estimated_cost,
            "unobserved_components": self.unobserved_components,
            "components_total": self.components_total,
            "error": self.error,
        }
        if include_timings:
            d["wall_time_s"] = self.wall_time_s
        return d


@dataclass(eq=False)
class RunReport:
    config: dict
    records: list[InstanceRecord]
    aggregates: dict
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_json_dict(self, include_timings: bool = False) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "aggregates": self.aggregates,
            "records": [r.to_json_dict(include_timings) for r in self.records],
        }

    def to_json_bytes(self, include_timings: bool = False) -> bytes:
        text = json.dumps(self.to_json_dict(include_timings), indent=2)
        return (text + "\n").encode("utf-8")

    def to_csv_text(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for r in self.records:
            row = []
            for col in CSV_COLUMNS:
                value = getattr(r, col)
                if value is None:
                    row.append("")
                elif isinstance(value, bool):
                    row.append("true" if value else "false")
                elif isinstance(value, float):
                    row.append(repr(value))
                else:
                    row.append(str(value))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _run_dst_instance(config: ExperimentConfig, index: int) -> InstanceRecord:
    dag = steiner.generate_dst(config.dst_params(), instance_seed(config.master_seed, index))
    schedule = config.schedule_for(dag.size)
    stop = config.stop_rule()
    sa = steiner.anneal(
        dag, schedule, stop, rng.seed_sequence(config.master_seed, index, ROLE_SA)
    )
    ea = steiner.anneal(
        dag,
        schedule,
        stop,
        rng.seed_sequence(config.master_seed, index, ROLE_EA),
        estimate_costs=True,
        prior=config.prior,
    )
    agree = sa.final_config.canonical() == ea.final_config.canonical()
    return InstanceRecord(
        instance_id=index,
        size=dag.size,
        sa_cost=sa.final_true_cost,
        ea_cost=ea.final_true_cost,
        agree=agree,
        deviation=deviation(sa.final_true_cost, ea.final_true_cost),
        sa_iters=sa.iterations_used,
        ea_iters=ea.iterations_used,
        sa_frozen=sa.frozen,
        ea_frozen=ea.frozen,
        ea_estimated_cost=ea.final_estimated_cost,
        unobserved_components=ea.unobserved_edges,
        components_total=dag.n_edges,
    )


def _run_tsp_instance(config: ExperimentConfig, index: int) -> InstanceRecord:
    gen_seed = instance_seed(config.master_seed, index)
    span = config.max_cities - config.min_cities + 1
    first = rng.generator(gen_seed).random()
    n = config.min_cities + min(int(first * span), span - 1)
    instance = tsp.generate_tsp(n, rng.seed_sequence(gen_seed, 1))
    schedule = config.schedule_for(n)
    stop = config.stop_rule()
    noise = tsp.TravelNoise(config.noise_half_width)
    sa = tsp.anneal(instance, schedule, stop, rng.seed_sequence(config.master_seed, index, ROLE_SA))
    ea = tsp.anneal(
        instance,
        schedule,
        stop,
        rng.seed_sequence(config.master_seed, index, ROLE_EA),
        estimate_costs=True,
        noise=noise,
        prior=config.prior,
    )
    agree = sa.final_tour.order == ea.final_tour.order
    return InstanceRecord(
        instance_id=index,
        size=n,
        sa_cost=sa.final_true_cost,
        ea_cost=ea.final_true_cost,
        agree=agree,
        deviation=deviation(sa.final_true_cost, ea.final_true_cost),
        sa_iters=sa.iterations_used,
        ea_iters=ea.iterations_used,
        sa_frozen=sa.frozen,
        ea_frozen=ea.frozen,
        ea_estimated_cost=ea.final_estimated_cost,
        unobserved_components=ea.unobserved_legs,
        components_total=n * (n - 1) // 2,
    )


def _run_abstract_instance(config: ExperimentConfig, index: int) -> InstanceRecord:
    k = config.num_actions
    costs = 0.1 + rng.generator(instance_seed(config.master_seed, index)).random(k)
    space = FiniteActionSpace(tuple(range(k)))
    payoff = -costs
    schedule = config.schedule_for(k)
    stop = config.stop_rule()
    kernel = UniformProposal(k)
    sa = simulated_annealing(
        payoff, kernel, schedule, stop, rng.seed_sequence(config.master_seed, index, ROLE_SA)
    )
    env_cls = AdditiveUniformPayoff if config.noise_family == "additive" else MultiplicativeUniformPayoff
    env = env_cls(payoff, config.noise_half_width)
    ea, estimator = macau.ergodic_annealing(
        space,
        schedule,
        stop,
        rng.seed_sequence(config.master_seed, index, ROLE_EA),
        env=env,
        kernel=kernel,
        prior=config.prior,
    )
    sa_cost = float(costs[sa.final_state])
    ea_cost = float(costs[ea.final_state])
    return InstanceRecord(
        instance_id=index,
        size=k,
        sa_cost=sa_cost,
        ea_cost=ea_cost,
        agree=sa.final_state == ea.final_state,
        deviation=deviation(sa_cost, ea_cost),
        sa_iters=sa.iterations_used,
        ea_iters=ea.iterations_used,
        sa_frozen=sa.frozen,
        ea_frozen=ea.frozen,
        ea_estimated_cost=-ea.final_estimated_value,
        unobserved_components=int(np.count_nonzero(estimator.counts == 0)),
        components_total=k,
    )


_RUNNERS = {
    "dst": _run_dst_instance,
    "tsp": _run_tsp_instance,
    "abstract": _run_abstract_instance,
}


def run_instance(config: ExperimentConfig, index: int) -> InstanceRecord:
    """Run one instance of a sweep; depends only on (config, index)."""
    start = time.perf_counter()
    try:
        record = _RUNNERS[config.problem](config, index)
    except Exception as exc:  # per-instance failures never abort the sweep
        record = InstanceRecord(instance_id=index, error=f"{type(exc).__name__}: {exc}")
    record.wall_time_s = time.perf_counter() - start
    return record


def run_benchmark(config: ExperimentConfig) -> RunReport:
    """Run the full sweep and aggregate the comparison metrics."""
    records = [run_instance(config, i) for i in range(config.instance_count)]
    ok = [r for r in records if r.error is None]
    deviations = [r.deviation for r in ok]
    aggregates = {
        "instance_count": config.instance_count,
        "completed": len(ok),
        "failures": len(records) - len(ok),
        "agreement_count": sum(1 for r in ok if r.agree),
        "mean_deviation": (sum(deviations) / len(deviations)) if deviations else None,
        "ea_not_worse_count": sum(1 for r in ok if r.ea_cost <= r.sa_cost),
    }
    return RunReport(config=config.to_dict(), records=records, aggregates=aggregates)
