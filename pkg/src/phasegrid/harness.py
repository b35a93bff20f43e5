"""Experiment orchestration: seeded training runs, periodic evaluation, CSV output.

Every (agent, scenario, mode, seed) cell trains a fresh agent and evaluates
one episode after each eval interval. Evaluation uses its own random stream
derived from the run seed and the eval index, so training trajectories are
identical whether or not evaluations run, and finished runs can be
re-evaluated from checkpoints bit for bit.
"""
from __future__ import annotations

import csv
import hashlib
import os
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agents import DivergenceError, EpsilonSchedule, make_agent, run_episode
from .config import ExperimentConfig, HyperParameters
from .env import Mode, PhaseChangeEnv, PhaseDiagram, Scenario

OUT_DIR_ENV_VAR = "PHASEGRID_OUT_DIR"

RAW_HEADER = ("agent", "mode", "scenario", "seed", "episode", "steps", "success")
AGGREGATE_HEADER = ("agent", "mode", "scenario", "episode", "mean_steps", "stddev", "n_seeds")


@dataclass(frozen=True)
class EvalPoint:
    seed: int
    episode: int
    steps: int
    success: bool


@dataclass(frozen=True)
class CurvePoint:
    episode: int
    mean_steps: float
    stddev: float
    n_seeds: int


@dataclass(frozen=True)
class LearningCurve:
    agent: str
    mode: Mode
    scenario: str
    points: tuple[CurvePoint, ...]


def derive_run_seed(base_seed: int, agent: str, scenario: str, mode: Mode, seed: int) -> int:
    """Stable 63-bit seed for one run; sha256 so it survives interpreter restarts."""
    key = f"{base_seed}|{agent}|{scenario}|{mode.value}|{seed}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


def _eval_rng(run_seed: int, eval_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([run_seed, 2, eval_index]))


def evaluate(agent, diagram: PhaseDiagram, scenario: Scenario, eval_epsilon: float,
             step_cap: int, rng: np.random.Generator) -> tuple[int, bool]:
    """One greedy-with-noise test episode; no learning, no buffer writes."""
    env = PhaseChangeEnv(diagram, scenario, goal_augmented=agent.goal_augmented, step_cap=step_cap)
    schedule = EpsilonSchedule.constant(eval_epsilon)
    record = run_episode(agent, env, schedule, rng, train=False, step_cap=step_cap)
    return record.steps, record.success


def run_single_seed(
    agent_name: str,
    diagram: PhaseDiagram,
    scenario: Scenario,
    hyper: HyperParameters,
    episodes: int,
    eval_interval: int,
    eval_epsilon: float,
    step_cap: int,
    base_seed: int,
    seed: int,
    snapshot_hook=None,
) -> list[EvalPoint]:
    """Train one agent on one scenario/mode and collect its evaluation points.

    ``step_cap`` bounds evaluation episodes; training episodes truncate at
    the (shorter) ``hyper.train_step_cap``. A run that diverges is cut short
    with a warning; the points gathered so far are kept.
    ``snapshot_hook(eval_index, agent)`` fires right before each evaluation,
    for checkpointing.
    """
    run_seed = derive_run_seed(base_seed, agent_name, scenario.name, scenario.mode, seed)
    agent_ss, explore_ss = np.random.SeedSequence(run_seed).spawn(2)
    agent = make_agent(agent_name, diagram, hyper, seed=agent_ss)
    explore_rng = np.random.default_rng(explore_ss)
    train_cap = hyper.train_step_cap
    env = PhaseChangeEnv(diagram, scenario, goal_augmented=agent.goal_augmented, step_cap=train_cap)

    points: list[EvalPoint] = []
    for episode in range(1, episodes + 1):
        try:
            record = run_episode(agent, env, agent.schedule, explore_rng, train=True, step_cap=train_cap)
            agent.store_and_maybe_train(record.transitions)
        except DivergenceError as exc:
            warnings.warn(
                f"run ({agent_name}, {scenario.name}, {scenario.mode.value}, seed {seed}) "
                f"diverged at episode {episode}: {exc}; dropping the rest of the run"
            )
            break
        if episode % eval_interval == 0:
            eval_index = episode // eval_interval
            if snapshot_hook is not None:
                snapshot_hook(eval_index, agent)
            steps, success = evaluate(
                agent, diagram, scenario, eval_epsilon, step_cap, _eval_rng(run_seed, eval_index)
            )
            points.append(EvalPoint(seed, episode, steps, success))
    return points


RawRow = tuple[str, str, str, int, int, int, int]


def run_experiment(config: ExperimentConfig) -> tuple[list[RawRow], list[LearningCurve]]:
    """Run the full agents x scenarios x modes x seeds grid sequentially."""
    config.validate()
    rows: list[RawRow] = []
    for agent_name in config.agents:
        for scenario_name in config.scenarios:
            for mode in config.modes:
                scenario = config.environment.scenario(scenario_name, mode)
                for seed in config.seeds:
                    points = run_single_seed(
                        agent_name,
                        config.environment.diagram,
                        scenario,
                        config.hyperparameters,
                        config.episodes,
                        config.eval_interval,
                        config.eval_epsilon,
                        config.step_cap,
                        config.base_seed,
                        seed,
                    )
                    rows.extend(
                        (agent_name, mode.value, scenario_name, pt.seed, pt.episode,
                         pt.steps, int(pt.success))
                        for pt in points
                    )
    rows.sort()
    return rows, aggregate_curves(rows)


def aggregate_curves(rows: list[RawRow]) -> list[LearningCurve]:
    """Mean and population stddev of steps over seeds, per evaluation episode."""
    grouped: dict[tuple[str, str, str], dict[int, list[int]]] = {}
    for agent, mode, scenario, _seed, episode, steps, _success in rows:
        grouped.setdefault((agent, mode, scenario), {}).setdefault(episode, []).append(steps)
    curves = []
    for (agent, mode, scenario), by_episode in sorted(grouped.items()):
        points = tuple(
            CurvePoint(
                episode,
                float(np.mean(steps)),
                float(np.std(steps)),
                len(steps),
            )
            for episode, steps in sorted(by_episode.items())
        )
        curves.append(LearningCurve(agent, Mode.parse(mode), scenario, points))
    return curves


def resolve_out_path(path: str | Path) -> Path:
    """Relative output paths land under $PHASEGRID_OUT_DIR when it is set."""
    path = Path(path)
    base = os.environ.get(OUT_DIR_ENV_VAR)
    if base and not path.is_absolute():
        return Path(base) / path
    return path


def write_results(rows: list[RawRow], curves: list[LearningCurve],
                  raw_path: str | Path, aggregate_path: str | Path) -> None:
    """Write the raw per-episode CSV and the seed-aggregated CSV."""
    raw_path = resolve_out_path(raw_path)
    aggregate_path = resolve_out_path(aggregate_path)
    for parent in {raw_path.parent, aggregate_path.parent}:
        parent.mkdir(parents=True, exist_ok=True)

    with open(raw_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RAW_HEADER)
        writer.writerows(sorted(rows))

    with open(aggregate_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_HEADER)
        for curve in curves:
            for pt in curve.points:
                writer.writerow(
                    (curve.agent, curve.mode.value, curve.scenario, pt.episode,
                     f"{pt.mean_steps:.6f}", f"{pt.stddev:.6f}", pt.n_seeds)
                )


def aggregate_path_for(raw_path: str | Path) -> Path:
    raw_path = Path(raw_path)
    return raw_path.with_name(raw_path.stem + "_aggregate" + raw_path.suffix)
