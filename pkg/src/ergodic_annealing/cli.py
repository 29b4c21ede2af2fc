"""Command-line interface.

Subcommands:

* ``gen``        emit random instance files (dst or tsp)
* ``anneal``     known-cost annealing on one instance file
* ``ergodic``    learned-cost annealing on one instance file
* ``bench``      full sweep: JSON report plus CSV of per-instance records
* ``conjecture`` Macau long-run frequency / replica-distribution check

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench, macau, rng, steiner, tsp
from .bench import ConfigError, ExperimentConfig

RESULT_SCHEMA_VERSION = 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergodic-annealing",
        description="Annealing with known or learned costs on layered Steiner and TSP instances.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate instance files")
    p_gen.add_argument("--problem", choices=["dst", "tsp"], required=True)
    p_gen.add_argument("--count", type=int, default=1)
    p_gen.add_argument("--config", type=Path, help="config file for generator parameters")
    p_gen.add_argument("--seed", type=int, help="master seed (overrides config)")
    p_gen.add_argument("--out", type=Path, default=Path("."), help="output directory")

    for name, help_text in (
        ("anneal", "anneal one instance with known costs"),
        ("ergodic", "anneal one instance learning its costs"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--instance", type=Path, required=True)
        p.add_argument("--config", type=Path, help="config file for schedule/stop parameters")
        p.add_argument("--seed", type=int, default=0, help="chain seed")
        p.add_argument("--out", type=Path, help="result file (stdout when omitted)")

    p_bench = sub.add_parser("bench", help="run a benchmark sweep")
    p_bench.add_argument("--config", type=Path, required=True)
    p_bench.add_argument("--seed", type=int, help="master seed (overrides config)")
    p_bench.add_argument("--out", type=Path, help="report path (stdout when omitted)")
    p_bench.add_argument(
        "--format",
        choices=["json", "csv", "both"],
        default="both",
        help="what to write to --out (csv lands next to the json)",
    )
    p_bench.add_argument(
        "--timings", action="store_true", help="include wall times (breaks byte reproducibility)"
    )

    p_conj = sub.add_parser("conjecture", help="Macau convergence diagnostics")
    p_conj.add_argument("--beta", type=float, default=1.0)
    p_conj.add_argument("--steps", type=int, default=500_000)
    p_conj.add_argument("--replicas", type=int, default=2000)
    p_conj.add_argument("--replica-steps", type=int, default=None)
    p_conj.add_argument("--actions", type=int, default=6)
    p_conj.add_argument(
        "--noise", choices=["deterministic", "additive", "multiplicative"], default="multiplicative"
    )
    p_conj.add_argument("--half-width", type=float, default=0.25)
    p_conj.add_argument("--prior", type=float, default=0.5)
    p_conj.add_argument("--seed", type=int, default=0)
    p_conj.add_argument("--out", type=Path, help="record file (stdout when omitted)")

    return parser


def _emit(payload: dict, out: Path | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


def _load_config(path: Path | None, problem: str | None = None) -> ExperimentConfig:
    if path is None:
        if problem is None:
            raise ConfigError("a config file is required")
        return ExperimentConfig(problem=problem)
    config = ExperimentConfig.from_file(path)
    if problem is not None and config.problem != problem:
        config = ExperimentConfig.from_dict({**config.to_dict(), "problem": problem})
    return config


def _cmd_gen(args) -> int:
    config = _load_config(args.config, problem=args.problem)
    if args.seed is not None:
        config = ExperimentConfig.from_dict({**config.to_dict(), "master_seed": args.seed})
    if args.count < 1:
        raise ConfigError("--count must be positive")
    args.out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        seed = bench.instance_seed(config.master_seed, i)
        if args.problem == "dst":
            dag = steiner.generate_dst(config.dst_params(), seed)
            path = args.out / f"dst_{i:04d}.json"
            steiner.save(dag, path)
        else:
            span = config.max_cities - config.min_cities + 1
            first = rng.generator(seed).random()
            n = config.min_cities + min(int(first * span), span - 1)
            instance = tsp.generate_tsp(n, rng.seed_sequence(seed, 1))
            path = args.out / f"tsp_{i:04d}.json"
            tsp.save(instance, path)
        sys.stdout.write(f"{path}\n")
    return 0


def _load_instance(path: Path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    problem = data.get("problem")
    if problem == "dst":
        return "dst", steiner.from_json_dict(data)
    if problem == "tsp":
        return "tsp", tsp.from_json_dict(data)
    raise ConfigError(f"{path}: unknown instance kind {problem!r}")


def _cmd_single(args, estimate_costs: bool) -> int:
    kind, instance = _load_instance(args.instance)
    config = _load_config(args.config, problem=kind)
    size = instance.size if kind == "dst" else instance.n
    schedule = config.schedule_for(size)
    stop = config.stop_rule()
    if kind == "dst":
        run = steiner.anneal(
            instance, schedule, stop, args.seed, estimate_costs=estimate_costs, prior=config.prior
        )
        final_config = [list(instance.vertex_label(v)) for v in run.final_config.canonical()]
        best_cost = run.best_true_cost
    else:
        run = tsp.anneal(
            instance,
            schedule,
            stop,
            args.seed,
            estimate_costs=estimate_costs,
            noise=tsp.TravelNoise(config.noise_half_width),
            prior=config.prior,
        )
        final_config = list(run.final_tour.order)
        best_cost = run.best_true_cost
    payload = {
        "schema_version": RESULT_SCHEMA_VERSION,
        "problem": kind,
        "mode": "ergodic" if estimate_costs else "anneal",
        "seed": args.seed,
        "size": size,
        "final_cost": run.final_true_cost,
        "final_estimated_cost": run.final_estimated_cost,
        "best_cost": best_cost,
        "iterations": run.iterations_used,
        "frozen": run.frozen,
        "final_config": final_config,
        "config": config.to_dict(),
    }
    _emit(payload, args.out)
    return 0


def _cmd_bench(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        config = ExperimentConfig.from_dict({**config.to_dict(), "master_seed": args.seed})
    report = bench.run_benchmark(config)
    json_bytes = report.to_json_bytes(include_timings=args.timings)
    if args.out is None:
        if args.format in ("json", "both"):
            sys.stdout.write(json_bytes.decode("utf-8"))
        if args.format in ("csv", "both"):
            sys.stdout.write(report.to_csv_text())
        return 0
    args.out.parent.mkdir(parents=True, exist_ok=True)
    if args.format in ("json", "both"):
        args.out.write_bytes(json_bytes)
        sys.stdout.write(f"{args.out}\n")
    if args.format in ("csv", "both"):
        csv_path = args.out.with_suffix(".csv") if args.format == "both" else args.out
        csv_path.write_text(report.to_csv_text(), encoding="utf-8")
        sys.stdout.write(f"{csv_path}\n")
    return 0


def _cmd_conjecture(args) -> int:
    means = rng.generator(args.seed, 2).random(args.actions)
    if args.noise == "deterministic":
        env = macau.DeterministicPayoff(means)
    elif args.noise == "additive":
        env = macau.AdditiveUniformPayoff(means, args.half_width)
    else:
        env = macau.MultiplicativeUniformPayoff(means, args.half_width)
    record = macau.conjecture_report(
        env,
        args.beta,
        args.steps,
        args.seed,
        replicas=args.replicas,
        replica_steps=args.replica_steps,
        prior=args.prior,
    )
    _emit(record, args.out)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "anneal":
            return _cmd_single(args, estimate_costs=False)
        if args.command == "ergodic":
            return _cmd_single(args, estimate_costs=True)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "conjecture":
            return _cmd_conjecture(args)
        parser.print_usage(sys.stderr)
        return 1
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except Exception as exc:  # unexpected runtime failure
        sys.stderr.write(f"runtime failure: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
