"""JSON configuration files for the environment geometry and experiments.

Both schemas are documented in the README. Unknown keys are rejected so a
typo'd option fails loudly instead of silently using a default.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .env import (
    BoundarySegment,
    Mode,
    PhaseDiagram,
    Scenario,
    default_diagram,
    default_scenarios,
)


class ConfigError(ValueError):
    """Malformed or contradictory configuration."""


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _as_cell(value: Any, where: str) -> tuple[int, int]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{where} must be a [t, p] pair, got {value!r}")
    return int(value[0]), int(value[1])


@dataclass
class EnvironmentConfig:
    diagram: PhaseDiagram
    scenarios: dict[str, Scenario]
    mode: Mode

    @classmethod
    def defaults(cls, mode: Mode = Mode.SEMI_MARKOV) -> "EnvironmentConfig":
        return cls(default_diagram(), default_scenarios(mode), mode)

    def scenario(self, name: str, mode: Mode | None = None) -> Scenario:
        if name not in self.scenarios:
            raise ConfigError(f"unknown scenario {name!r}; have {sorted(self.scenarios)}")
        base = self.scenarios[name]
        if mode is None or mode is base.mode:
            return base
        return Scenario(base.name, base.start, base.goal, mode)


def parse_environment(raw: dict, where: str = "environment") -> EnvironmentConfig:
    _require_keys(raw, {"grid", "boundaries", "scenarios", "mode"}, where)
    grid = raw.get("grid")
    if not isinstance(grid, dict):
        raise ConfigError(f"{where}.grid must be an object with width/height")
    _require_keys(grid, {"width", "height"}, f"{where}.grid")
    try:
        width, height = int(grid["width"]), int(grid["height"])
    except KeyError as exc:
        raise ConfigError(f"{where}.grid missing {exc.args[0]}") from None

    segments = []
    for i, seg in enumerate(raw.get("boundaries", [])):
        label = f"{where}.boundaries[{i}]"
        if not isinstance(seg, dict):
            raise ConfigError(f"{label} must be an object")
        _require_keys(seg, {"orientation", "index", "span"}, label)
        try:
            span = seg["span"]
            segments.append(
                BoundarySegment(str(seg["orientation"]), int(seg["index"]), (int(span[0]), int(span[1])))
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ConfigError(f"{label}: {exc}") from None

    try:
        diagram = PhaseDiagram(width, height, tuple(segments))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    mode = Mode.parse(str(raw.get("mode", "semi")))

    scenarios_raw = raw.get("scenarios")
    if not isinstance(scenarios_raw, dict) or not scenarios_raw:
        raise ConfigError(f"{where}.scenarios must map names to start/goal cells")
    scenarios: dict[str, Scenario] = {}
    for name, body in scenarios_raw.items():
        label = f"{where}.scenarios.{name}"
        if not isinstance(body, dict):
            raise ConfigError(f"{label} must be an object")
        _require_keys(body, {"start", "goal"}, label)
        start = _as_cell(body.get("start"), f"{label}.start")
        goal = _as_cell(body.get("goal"), f"{label}.goal")
        scenario = Scenario(str(name), start, goal, mode)
        try:
            scenario.validate(diagram)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        scenarios[str(name)] = scenario

    return EnvironmentConfig(diagram, scenarios, mode)


def load_environment(path: str | Path) -> EnvironmentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_environment(raw, where=str(path))


@dataclass
class HyperParameters:
    """Agent settings shared by the harness; every field has the stock default.

    Training episodes truncate at ``train_step_cap``, deliberately shorter
    than the 10,000-step evaluation cap: with per-step exploration decay, a
    long cap lets a handful of early random-walk episodes exhaust the whole
    exploration budget and then flood the replay buffer with near-greedy
    loops, which stalls learning outright. The 0.2 exploration floor and the
    long warm-up keep reward-bearing data flowing into the buffer for the
    same reason.

    Recurrent agents use the smaller ``recurrent_learning_rate``: their
    training inputs include hidden states produced by their own past weights,
    and a larger step size lets that input distribution outrun the value fit,
    which shows up as late-training collapses.
    """

    gamma: float = 0.95
    learning_rate: float = 0.001
    recurrent_learning_rate: float = 0.0005
    batch_size: int = 127
    dense_hidden: int = 48
    gru_hidden: int = 128
    buffer_capacity: int = 100_000
    warmup: int = 25_000
    epsilon_start: float = 1.0
    epsilon_decay: float = 0.00001
    epsilon_floor: float = 0.2
    her_fraction: float = 0.05
    train_step_cap: int = 500


AGENT_NAMES = ("dqn", "drqn", "dqn_her", "drqn_her")


@dataclass
class ExperimentConfig:
    environment: EnvironmentConfig
    agents: tuple[str, ...] = AGENT_NAMES
    scenarios: tuple[str, ...] = ("hard", "mod", "easy")
    modes: tuple[Mode, ...] = (Mode.SEMI_MARKOV, Mode.MARKOV)
    episodes: int = 20_000
    eval_interval: int = 50
    eval_epsilon: float = 0.2
    step_cap: int = 10_000
    seeds: tuple[int, ...] = tuple(range(30))
    base_seed: int = 0
    hyperparameters: HyperParameters = field(default_factory=HyperParameters)

    def validate(self) -> None:
        if self.episodes < 1:
            raise ConfigError(f"episodes must be positive, got {self.episodes}")
        if self.eval_interval < 1 or self.episodes % self.eval_interval != 0:
            raise ConfigError(
                f"eval_interval {self.eval_interval} must divide episodes {self.episodes}"
            )
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seed list contains duplicates")
        if not self.agents:
            raise ConfigError("no agents selected")
        for name in self.agents:
            if name not in AGENT_NAMES:
                raise ConfigError(f"unknown agent {name!r}; have {AGENT_NAMES}")
        for name in self.scenarios:
            if name not in self.environment.scenarios:
                raise ConfigError(f"unknown scenario {name!r}")
        if not (0.0 <= self.eval_epsilon <= 1.0):
            raise ConfigError(f"eval_epsilon must be in [0, 1], got {self.eval_epsilon}")


_EXPERIMENT_KEYS = {
    "environment",
    "agents",
    "scenarios",
    "modes",
    "episodes",
    "eval_interval",
    "eval_epsilon",
    "step_cap",
    "seeds",
    "base_seed",
    "hyperparameters",
}


def parse_experiment(raw: dict, where: str = "experiment") -> ExperimentConfig:
    _require_keys(raw, _EXPERIMENT_KEYS, where)
    if "environment" in raw:
        environment = parse_environment(raw["environment"], f"{where}.environment")
    else:
        environment = EnvironmentConfig.defaults()

    hp = HyperParameters()
    hp_names = {f.name for f in fields(HyperParameters)}
    for key, value in raw.get("hyperparameters", {}).items():
        if key not in hp_names:
            raise ConfigError(f"unknown key(s) ['{key}'] in {where}.hyperparameters")
        setattr(hp, key, type(getattr(hp, key))(value))

    seeds_raw = raw.get("seeds", 30)
    if isinstance(seeds_raw, int):
        seeds = tuple(range(seeds_raw))
    else:
        seeds = tuple(int(s) for s in seeds_raw)

    modes = tuple(Mode.parse(str(m)) for m in raw.get("modes", ["semi", "markov"]))

    config = ExperimentConfig(
        environment=environment,
        agents=tuple(raw.get("agents", AGENT_NAMES)),
        scenarios=tuple(raw.get("scenarios", sorted(environment.scenarios))),
        modes=modes,
        episodes=int(raw.get("episodes", 20_000)),
        eval_interval=int(raw.get("eval_interval", 50)),
        eval_epsilon=float(raw.get("eval_epsilon", 0.2)),
        step_cap=int(raw.get("step_cap", 10_000)),
        seeds=seeds,
        base_seed=int(raw.get("base_seed", 0)),
        hyperparameters=hp,
    )
    config.validate()
    return config


def load_experiment(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_experiment(raw, where=str(path))
