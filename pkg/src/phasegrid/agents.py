"""Value-based agents: epsilon-greedy control, replay, optional hindsight relabeling.

Training follows the per-episode protocol: transitions are buffered when an
episode ends and, once the buffer has passed its warm-up size, a single Adam
step is taken on one uniformly sampled batch. Targets come from the same
network that is being updated; there is no target network.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .config import HyperParameters
from .env import (
    N_ACTIONS,
    PhaseChangeEnv,
    PhaseDiagram,
    encode_observation,
    observation_dim,
)
from .nets import Adam, DenseQNetwork, GruQNetwork


class DivergenceError(RuntimeError):
    """Raised when Q-values or the training loss stop being finite."""


@dataclass
class EpsilonSchedule:
    """Linearly decaying exploration rate with a floor; advances per env step."""

    start: float = 1.0
    decay: float = 0.00001
    floor: float = 0.01
    steps: int = 0

    @property
    def value(self) -> float:
        return max(self.floor, self.start - self.decay * self.steps)

    def advance(self) -> None:
        self.steps += 1

    @classmethod
    def constant(cls, epsilon: float) -> "EpsilonSchedule":
        return cls(start=epsilon, decay=0.0, floor=epsilon)


@dataclass
class Transition:
    """One replay record; hidden states are present only for recurrent agents."""

    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool
    goal: tuple[int, int]
    h_pre: np.ndarray | None = None
    h_post: np.ndarray | None = None


class ReplayBuffer:
    """Bounded FIFO of transitions; oldest entries are overwritten first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0  # next slot to overwrite once full

    def extend(self, transitions) -> None:
        for tr in transitions:
            if len(self._items) < self.capacity:
                self._items.append(tr)
            else:
                self._items[self._cursor] = tr
                self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if batch_size > len(self._items):
            raise ValueError(f"cannot sample {batch_size} from buffer of {len(self._items)}")
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]

    def __len__(self) -> int:
        return len(self._items)


def _decode_cell(encoded_t: float, encoded_p: float, diagram: PhaseDiagram) -> tuple[int, int]:
    return (
        int(round(encoded_t * (diagram.width - 1))),
        int(round(encoded_p * (diagram.height - 1))),
    )


def her_relabel(transitions: list[Transition], diagram: PhaseDiagram,
                rng: np.random.Generator, fraction: float = 0.05) -> list[Transition]:
    """Rewrite a random 5% of failed transitions as successes toward the reached state.

    A selected transition gets reward 1, done set, and its goal replaced by
    the state it actually arrived in, including the goal features inside both
    encoded observations. Successful transitions always pass through intact.
    """
    relabeled = []
    for tr in transitions:
        if tr.obs.shape[-1] != 4:
            raise ValueError("hindsight relabeling needs goal-augmented observations")
        if tr.reward == 0 and rng.random() < fraction:
            achieved_enc = tr.next_obs[:2]
            obs = tr.obs.copy()
            next_obs = tr.next_obs.copy()
            obs[2:] = achieved_enc
            next_obs[2:] = achieved_enc
            relabeled.append(
                replace(tr, obs=obs, next_obs=next_obs, reward=1.0, done=True,
                        goal=_decode_cell(achieved_enc[0], achieved_enc[1], diagram))
            )
        else:
            relabeled.append(tr)
    return relabeled


@dataclass
class AgentConfig:
    kind: str = "dqn"  # "dqn" | "drqn"
    her: bool = False
    hyper: HyperParameters = field(default_factory=HyperParameters)

    def __post_init__(self) -> None:
        if self.kind not in ("dqn", "drqn"):
            raise ValueError(f"kind must be 'dqn' or 'drqn', got {self.kind!r}")
        if not (0.0 < self.hyper.gamma < 1.0):
            raise ValueError(f"gamma must be in (0, 1), got {self.hyper.gamma}")
        if self.hyper.batch_size > self.hyper.buffer_capacity:
            raise ValueError("batch size exceeds buffer capacity")


class DQNAgent:
    """Feedforward Q-learner. Observations with equal encodings get equal Q-values."""

    recurrent = False

    def __init__(self, config: AgentConfig, diagram: PhaseDiagram,
                 seed: int | np.random.SeedSequence = 0):
        self.config = config
        self.diagram = diagram
        self.goal_augmented = config.her
        hp = config.hyper
        if not isinstance(seed, np.random.SeedSequence):
            seed = np.random.SeedSequence(seed)
        init_seed, sample_seed = seed.spawn(2)
        self.network = self._build_network(np.random.default_rng(init_seed))
        self.optimizer = Adam(learning_rate=self._learning_rate())
        self.buffer = ReplayBuffer(hp.buffer_capacity)
        self.schedule = EpsilonSchedule(hp.epsilon_start, hp.epsilon_decay, hp.epsilon_floor)
        self._rng = np.random.default_rng(sample_seed)

    def _build_network(self, rng: np.random.Generator) -> DenseQNetwork:
        return DenseQNetwork(observation_dim(self.goal_augmented),
                             self.config.hyper.dense_hidden, N_ACTIONS, rng)

    def _learning_rate(self) -> float:
        return self.config.hyper.learning_rate

    @property
    def hidden_state(self) -> np.ndarray | None:
        return None

    def begin_episode(self) -> None:
        pass

    def q_values(self, obs_enc: np.ndarray) -> np.ndarray:
        q, _ = self.network.forward(obs_enc)
        return q

    def select_action(self, obs_enc: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
        """Epsilon-greedy; ties break toward the lowest action index."""
        q = self._acting_q(obs_enc)
        if rng.random() < epsilon:
            return int(rng.integers(N_ACTIONS))
        return int(np.argmax(q))

    def _acting_q(self, obs_enc: np.ndarray) -> np.ndarray:
        return self.q_values(obs_enc)

    # -- training -----------------------------------------------------------

    def td_targets(self, batch: list[Transition]) -> np.ndarray:
        """r for terminal transitions, r + gamma * max_a Q(s', a) otherwise."""
        gamma = self.config.hyper.gamma
        next_q = self._next_q(batch)
        if not np.all(np.isfinite(next_q)):
            raise DivergenceError("non-finite Q-values in bootstrap targets")
        targets = np.array([tr.reward for tr in batch])
        bootstrap = np.array([not tr.done for tr in batch])
        targets[bootstrap] += gamma * next_q.max(axis=1)[bootstrap]
        return targets

    def _next_q(self, batch: list[Transition]) -> np.ndarray:
        next_obs = np.stack([tr.next_obs for tr in batch])
        q, _ = self.network.forward(next_obs)
        return q

    def _predict_with_cache(self, batch: list[Transition]):
        obs = np.stack([tr.obs for tr in batch])
        return self.network.forward(obs)

    def td_loss_and_grads(self, batch: list[Transition]):
        """Mean squared TD error and its gradients; targets are constants."""
        targets = self.td_targets(batch)
        q, cache = self._predict_with_cache(batch)
        actions = np.array([tr.action for tr in batch])
        rows = np.arange(len(batch))
        predictions = q[rows, actions]
        errors = predictions - targets
        loss = float(np.mean(errors**2))
        dq = np.zeros_like(q)
        dq[rows, actions] = 2.0 * errors / len(batch)
        grads = self._backward(cache, dq)
        return loss, grads

    def _backward(self, cache, dq):
        return self.network.backward(cache, dq)

    def train_on_batch(self, batch: list[Transition]) -> float:
        loss, grads = self.td_loss_and_grads(batch)
        if not np.isfinite(loss):
            raise DivergenceError("non-finite training loss")
        self.optimizer.step(self.network.params, grads)
        return loss

    def store_and_maybe_train(self, transitions: list[Transition]) -> dict:
        """Buffer a finished episode and run one gradient step once warmed up."""
        hp = self.config.hyper
        if self.config.her:
            transitions = her_relabel(transitions, self.diagram, self._rng, hp.her_fraction)
        self.buffer.extend(transitions)
        if len(self.buffer) < hp.warmup:
            return {"trained": False, "loss": None, "buffer_size": len(self.buffer)}
        batch = self.buffer.sample(hp.batch_size, self._rng)
        loss = self.train_on_batch(batch)
        return {"trained": True, "loss": loss, "buffer_size": len(self.buffer)}


class DRQNAgent(DQNAgent):
    """Recurrent Q-learner; the GRU hidden state carries within-episode memory.

    Acting advances the hidden state on every step. Each stored transition
    keeps the hidden state from acting time (before consuming obs and before
    consuming next_obs), and training replays single steps from those stored
    states rather than from zeros.
    """

    recurrent = True

    def __init__(self, config: AgentConfig, diagram: PhaseDiagram,
                 seed: int | np.random.SeedSequence = 0):
        super().__init__(config, diagram, seed)
        self._h = self.network.zero_state()

    def _build_network(self, rng: np.random.Generator) -> GruQNetwork:
        return GruQNetwork(observation_dim(self.goal_augmented),
                           self.config.hyper.gru_hidden, N_ACTIONS, rng)

    def _learning_rate(self) -> float:
        return self.config.hyper.recurrent_learning_rate

    @property
    def hidden_state(self) -> np.ndarray:
        return self._h.copy()

    def begin_episode(self) -> None:
        self._h = self.network.zero_state()

    def q_values(self, obs_enc: np.ndarray) -> np.ndarray:
        q, _, _ = self.network.forward(obs_enc, self._h)
        return q

    def _acting_q(self, obs_enc: np.ndarray) -> np.ndarray:
        q, h_next, _ = self.network.forward(obs_enc, self._h)
        self._h = h_next
        return q

    def _next_q(self, batch: list[Transition]) -> np.ndarray:
        next_obs = np.stack([tr.next_obs for tr in batch])
        h_post = np.stack([tr.h_post for tr in batch])
        q, _, _ = self.network.forward(next_obs, h_post)
        return q

    def _predict_with_cache(self, batch: list[Transition]):
        obs = np.stack([tr.obs for tr in batch])
        h_pre = np.stack([tr.h_pre for tr in batch])
        q, _, cache = self.network.forward(obs, h_pre)
        return q, cache

    def _backward(self, cache, dq):
        grads, _ = self.network.backward(cache, dq)  # trace length 1: dh_prev unused
        return grads


def make_agent(name: str, diagram: PhaseDiagram, hyper: HyperParameters | None = None,
               seed: int | np.random.SeedSequence = 0) -> DQNAgent:
    """Agent factory for the four studied configurations."""
    hyper = hyper or HyperParameters()
    kinds = {
        "dqn": ("dqn", False),
        "drqn": ("drqn", False),
        "dqn_her": ("dqn", True),
        "drqn_her": ("drqn", True),
    }
    if name not in kinds:
        raise ValueError(f"unknown agent {name!r}; have {sorted(kinds)}")
    kind, her = kinds[name]
    config = AgentConfig(kind=kind, her=her, hyper=hyper)
    cls = DRQNAgent if kind == "drqn" else DQNAgent
    return cls(config, diagram, seed=seed)


@dataclass
class EpisodeRecord:
    steps: int
    success: bool
    truncated: bool
    transitions: list[Transition]


def run_episode(agent: DQNAgent, env: PhaseChangeEnv, schedule: EpsilonSchedule,
                rng: np.random.Generator, train: bool = True,
                step_cap: int | None = None) -> EpisodeRecord:
    """Act from reset until the goal or the step cap.

    When training, the schedule advances one decrement per step. Evaluation
    (train=False) touches neither the schedule nor the buffer; buffering and
    the gradient step stay with ``store_and_maybe_train`` so evaluation
    rollouts can reuse this function unchanged.
    """
    cap = step_cap if step_cap is not None else env.step_cap
    obs = env.reset()
    obs_enc = encode_observation(obs, env.diagram)
    agent.begin_episode()
    transitions: list[Transition] = []
    success = False
    steps = 0
    while steps < cap:
        h_pre = agent.hidden_state
        action = agent.select_action(obs_enc, schedule.value, rng)
        if train:
            schedule.advance()
        h_post = agent.hidden_state
        result = env.step(action)
        next_enc = encode_observation(result.observation, env.diagram)
        transitions.append(
            Transition(obs_enc, int(action), float(result.reward), next_enc,
                       result.done, env.scenario.goal, h_pre, h_post)
        )
        steps += 1
        if result.done:
            success = True
            break
        if result.truncated:
            break
        obs_enc = next_enc
    truncated = not success
    return EpisodeRecord(steps, success, truncated, transitions)
