"""Config file parsing: strict schemas, unknown-key rejection, defaults."""
import json

import pytest

from phasegrid.config import (
    ConfigError,
    EnvironmentConfig,
    ExperimentConfig,
    load_environment,
    load_experiment,
    parse_environment,
    parse_experiment,
)
from phasegrid.env import Mode

VALID_ENV = {
    "grid": {"width": 16, "height": 16},
    "boundaries": [
        {"orientation": "vertical", "index": 6, "span": [0, 15]},
        {"orientation": "vertical", "index": 11, "span": [0, 15]},
    ],
    "mode": "semi",
    "scenarios": {
        "hard": {"start": [1, 11], "goal": [15, 5]},
        "easy": {"start": [13, 6], "goal": [15, 5]},
    },
}


def test_environment_file_roundtrip(tmp_path):
    path = tmp_path / "env.json"
    path.write_text(json.dumps(VALID_ENV))
    cfg = load_environment(path)
    assert cfg.diagram.width == 16
    assert cfg.mode is Mode.SEMI_MARKOV
    assert cfg.scenario("hard").start == (1, 11)
    assert len(cfg.diagram.boundaries) == 2


def test_unknown_top_level_key_rejected():
    raw = dict(VALID_ENV, wall_density=0.3)
    with pytest.raises(ConfigError, match="wall_density"):
        parse_environment(raw)


def test_unknown_nested_keys_rejected():
    raw = json.loads(json.dumps(VALID_ENV))
    raw["grid"]["depth"] = 4
    with pytest.raises(ConfigError, match="depth"):
        parse_environment(raw)

    raw = json.loads(json.dumps(VALID_ENV))
    raw["boundaries"][0]["thickness"] = 2
    with pytest.raises(ConfigError, match="thickness"):
        parse_environment(raw)

    raw = json.loads(json.dumps(VALID_ENV))
    raw["scenarios"]["hard"]["reward"] = 10
    with pytest.raises(ConfigError, match="reward"):
        parse_environment(raw)


def test_bad_mode_rejected():
    raw = dict(VALID_ENV, mode="markovian")
    with pytest.raises(ValueError, match="markovian"):
        parse_environment(raw)


def test_invalid_geometry_surfaces_as_config_error():
    raw = json.loads(json.dumps(VALID_ENV))
    raw["grid"]["width"] = 1
    with pytest.raises(ConfigError, match="2x2"):
        parse_environment(raw)

    raw = json.loads(json.dumps(VALID_ENV))
    raw["scenarios"]["bad"] = {"start": [3, 3], "goal": [3, 3]}
    with pytest.raises(ConfigError, match="start equals goal"):
        parse_environment(raw)


def test_malformed_json_reports_path(tmp_path):
    path = tmp_path / "env.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="env.json"):
        load_environment(path)


def test_unknown_scenario_lookup():
    cfg = EnvironmentConfig.defaults()
    with pytest.raises(ConfigError, match="unknown scenario"):
        cfg.scenario("impossible")


def test_scenario_lookup_can_swap_mode():
    cfg = EnvironmentConfig.defaults(Mode.SEMI_MARKOV)
    swapped = cfg.scenario("hard", Mode.MARKOV)
    assert swapped.mode is Mode.MARKOV
    assert swapped.start == cfg.scenario("hard").start


# -- experiment config ------------------------------------------------------------


def test_experiment_defaults_follow_protocol():
    cfg = ExperimentConfig(environment=EnvironmentConfig.defaults())
    cfg.validate()
    assert cfg.episodes == 20_000
    assert cfg.eval_interval == 50
    assert cfg.eval_epsilon == 0.2
    assert cfg.step_cap == 10_000
    assert len(cfg.seeds) == 30
    assert cfg.episodes // cfg.eval_interval == 400


def test_experiment_file_with_overrides(tmp_path):
    raw = {
        "environment": VALID_ENV,
        "agents": ["dqn", "drqn"],
        "scenarios": ["hard"],
        "modes": ["semi"],
        "episodes": 200,
        "eval_interval": 50,
        "seeds": [3, 5],
        "hyperparameters": {"warmup": 64, "gamma": 0.9},
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(raw))
    cfg = load_experiment(path)
    assert cfg.agents == ("dqn", "drqn")
    assert cfg.seeds == (3, 5)
    assert cfg.hyperparameters.warmup == 64
    assert cfg.hyperparameters.gamma == 0.9
    assert cfg.hyperparameters.batch_size == 127  # untouched default


@pytest.mark.parametrize(
    "mutation,match",
    [
        ({"episodes": 0}, "episodes"),
        ({"eval_interval": 7}, "divide"),
        ({"seeds": []}, "empty"),
        ({"seeds": [1, 1]}, "duplicates"),
        ({"agents": ["sarsa"]}, "unknown agent"),
        ({"scenarios": ["impossible"]}, "unknown scenario"),
        ({"eval_epsilon": 1.5}, "eval_epsilon"),
        ({"surprise": 1}, "surprise"),
        ({"hyperparameters": {"momentum": 0.9}}, "momentum"),
    ],
)
def test_experiment_validation_failures(mutation, match):
    raw = {"episodes": 100, "eval_interval": 50, "seeds": 2}
    raw.update(mutation)
    with pytest.raises(ConfigError, match=match):
        parse_experiment(raw)


def test_seed_count_expands_to_range():
    cfg = parse_experiment({"seeds": 3, "episodes": 100, "eval_interval": 50})
    assert cfg.seeds == (0, 1, 2)
