"""Command-line entry points: train, sweep, oracle, validate, gradcheck."""
from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import harness, oracle
from .config import (
    AGENT_NAMES,
    ConfigError,
    EnvironmentConfig,
    ExperimentConfig,
    load_environment,
    load_experiment,
)
from .env import Mode
from .nets import DenseQNetwork, GruQNetwork, finite_difference_check


def _environment_from_args(args) -> EnvironmentConfig:
    if getattr(args, "config", None):
        return load_environment(args.config)
    return EnvironmentConfig.defaults()


def cmd_train(args) -> int:
    env_cfg = _environment_from_args(args)
    mode = Mode.parse(args.mode)
    config = ExperimentConfig(
        environment=env_cfg,
        agents=(args.agent,),
        scenarios=(args.scenario,),
        modes=(mode,),
        episodes=args.episodes,
        eval_interval=args.eval_interval,
        eval_epsilon=args.eval_epsilon,
        step_cap=args.step_cap,
        seeds=tuple(range(args.seeds)),
        base_seed=args.base_seed,
    )
    config.validate()
    rows, curves = harness.run_experiment(config)
    harness.write_results(rows, curves, args.out, harness.aggregate_path_for(args.out))
    print(f"wrote {len(rows)} evaluation rows to {harness.resolve_out_path(args.out)}")
    return 0


def cmd_sweep(args) -> int:
    if args.config:
        config = load_experiment(args.config)
    else:
        config = ExperimentConfig(environment=EnvironmentConfig.defaults())
    updates = {}
    if args.episodes is not None:
        updates["episodes"] = args.episodes
    if args.seeds is not None:
        updates["seeds"] = tuple(range(args.seeds))
    if args.base_seed is not None:
        updates["base_seed"] = args.base_seed
    if updates:
        config = dataclasses.replace(config, **updates)
    config.validate()
    rows, curves = harness.run_experiment(config)
    raw = f"{args.out_prefix}_raw.csv"
    agg = f"{args.out_prefix}_aggregate.csv"
    harness.write_results(rows, curves, raw, agg)
    print(f"wrote {len(rows)} rows to {harness.resolve_out_path(raw)}")
    return 0


def cmd_oracle(args) -> int:
    env_cfg = _environment_from_args(args)
    scenario = env_cfg.scenario(args.scenario, Mode.parse(args.mode))
    steps = oracle.optimal_steps(env_cfg.diagram, scenario)
    crossings = oracle.min_boundary_crossings(env_cfg.diagram, scenario)
    print(steps)
    print(f"crossings: {crossings}")
    return 0


def cmd_validate(args) -> int:
    env_cfg = _environment_from_args(args)
    report = oracle.validate_diagram(env_cfg.diagram, env_cfg.scenarios)
    for name, entry in sorted(report.items()):
        print(
            f"{name}: optimal markov={entry.optimal_markov} semi={entry.optimal_semi} "
            f"crossings={entry.crossings}"
        )
    return 0


def cmd_gradcheck(args) -> int:
    worst_dense = 0.0
    worst_gru = 0.0
    for instance in range(args.instances):
        rng = np.random.default_rng(1000 + instance)
        dense = DenseQNetwork(3, hidden_dim=5, rng=rng)
        x = rng.normal(size=3)
        target = rng.normal(size=4)

        def dense_loss() -> float:
            q, _ = dense.forward(x)
            return float(np.sum((q - target) ** 2))

        q, cache = dense.forward(x)
        grads = dense.backward(cache, 2.0 * (q - target))
        worst_dense = max(worst_dense, finite_difference_check(dense.params, dense_loss, grads, args.step))

        gru = GruQNetwork(3, hidden_dim=5, rng=rng)
        h = rng.normal(size=5)

        def gru_loss() -> float:
            q, _, _ = gru.forward(x, h)
            return float(np.sum((q - target) ** 2))

        q, _, cache = gru.forward(x, h)
        grads, _ = gru.backward(cache, 2.0 * (q - target))
        worst_gru = max(worst_gru, finite_difference_check(gru.params, gru_loss, grads, args.step))

    print(f"dense max relative error: {worst_dense:.3e}")
    print(f"gru   max relative error: {worst_gru:.3e}")
    ok = worst_dense < args.tolerance and worst_gru < args.tolerance
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phasegrid",
                                     description="Phase-change grid RL engine")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train one agent on one scenario and mode")
    train.add_argument("--agent", choices=AGENT_NAMES, required=True)
    train.add_argument("--scenario", required=True)
    train.add_argument("--mode", choices=["semi", "markov"], required=True)
    train.add_argument("--episodes", type=int, default=20_000)
    train.add_argument("--eval-interval", type=int, default=50)
    train.add_argument("--eval-epsilon", type=float, default=0.2)
    train.add_argument("--step-cap", type=int, default=10_000)
    train.add_argument("--seeds", type=int, default=1, help="number of seeds (0..n-1)")
    train.add_argument("--base-seed", type=int, default=0)
    train.add_argument("--config", help="environment config JSON")
    train.add_argument("--out", required=True, help="raw CSV path")
    train.set_defaults(func=cmd_train)

    sweep = sub.add_parser("sweep", help="run the full agents x scenarios x modes grid")
    sweep.add_argument("--config", help="experiment config JSON")
    sweep.add_argument("--episodes", type=int)
    sweep.add_argument("--seeds", type=int)
    sweep.add_argument("--base-seed", type=int)
    sweep.add_argument("--out-prefix", default="results/sweep")
    sweep.set_defaults(func=cmd_sweep)

    orc = sub.add_parser("oracle", help="print optimal steps and crossing count")
    orc.add_argument("--scenario", required=True)
    orc.add_argument("--mode", choices=["semi", "markov"], required=True)
    orc.add_argument("--config", help="environment config JSON")
    orc.set_defaults(func=cmd_oracle)

    val = sub.add_parser("validate", help="check geometry and scenario labels")
    val.add_argument("--config", help="environment config JSON")
    val.set_defaults(func=cmd_validate)

    grad = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    grad.add_argument("--instances", type=int, default=20)
    grad.add_argument("--step", type=float, default=1e-5)
    grad.add_argument("--tolerance", type=float, default=1e-4)
    grad.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
