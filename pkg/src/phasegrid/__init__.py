"""Phase-change grid environment, value-based agents, exact oracles, harness."""

from .env import (
    Action,
    BoundarySegment,
    EnvState,
    LatentFlag,
    Mode,
    Observation,
    PhaseChangeEnv,
    PhaseDiagram,
    Scenario,
    StepResult,
    default_diagram,
    default_scenarios,
    encode_observation,
    small_diagram,
    small_scenarios,
)
from .agents import (
    AgentConfig,
    DQNAgent,
    DRQNAgent,
    EpsilonSchedule,
    ReplayBuffer,
    Transition,
    her_relabel,
    make_agent,
    run_episode,
)
from .config import EnvironmentConfig, ExperimentConfig, HyperParameters
from .oracle import manhattan_lower_bound, optimal_steps, tabular_q_learning, validate_diagram

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AgentConfig",
    "BoundarySegment",
    "DQNAgent",
    "DRQNAgent",
    "EnvState",
    "EnvironmentConfig",
    "EpsilonSchedule",
    "ExperimentConfig",
    "HyperParameters",
    "LatentFlag",
    "Mode",
    "Observation",
    "PhaseChangeEnv",
    "PhaseDiagram",
    "ReplayBuffer",
    "Scenario",
    "StepResult",
    "Transition",
    "default_diagram",
    "default_scenarios",
    "encode_observation",
    "her_relabel",
    "make_agent",
    "manhattan_lower_bound",
    "optimal_steps",
    "run_episode",
    "small_diagram",
    "small_scenarios",
    "tabular_q_learning",
    "validate_diagram",
]
