"""Agent behavior: action selection, replay, hindsight relabeling, TD training."""
import numpy as np
import pytest

from phasegrid.agents import (
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
from phasegrid.config import HyperParameters
from phasegrid.env import (
    Mode,
    Observation,
    PhaseChangeEnv,
    default_diagram,
    default_scenarios,
    encode_observation,
)
from phasegrid.nets import finite_difference_check


def make_dqn(her=False, seed=0, **hyper_overrides) -> DQNAgent:
    hyper = HyperParameters(**hyper_overrides)
    return DQNAgent(AgentConfig("dqn", her, hyper), default_diagram(), seed=seed)


def make_drqn(her=False, seed=0, **hyper_overrides) -> DRQNAgent:
    hyper = HyperParameters(**{"gru_hidden": 8, **hyper_overrides})
    return DRQNAgent(AgentConfig("drqn", her, hyper), default_diagram(), seed=seed)


def make_transition(obs, action, reward, next_obs, done, goal=(30, 10)) -> Transition:
    return Transition(np.asarray(obs, dtype=float), action, float(reward),
                      np.asarray(next_obs, dtype=float), done, goal)


# -- epsilon schedule -----------------------------------------------------------


def test_epsilon_decays_linearly_to_floor():
    schedule = EpsilonSchedule(start=1.0, decay=0.1, floor=0.25)
    values = []
    for _ in range(12):
        values.append(schedule.value)
        schedule.advance()
    assert values[:4] == [1.0, 0.9, 0.8, pytest.approx(0.7)]
    assert values[-1] == 0.25
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_constant_schedule_never_moves():
    schedule = EpsilonSchedule.constant(0.2)
    schedule.advance()
    assert schedule.value == 0.2


# -- action selection -----------------------------------------------------------


def test_greedy_selection_takes_argmax():
    agent = make_dqn()
    agent.network.params["b2"][:] = [0.0, 0.0, 3.0, 0.0]
    for key in ("w1", "w2"):
        agent.network.params[key][:] = 0.0
    rng = np.random.default_rng(0)
    obs = np.array([0.5, 0.5])
    assert all(agent.select_action(obs, 0.0, rng) == 2 for _ in range(20))


def test_tied_q_values_pick_lowest_action_index():
    agent = make_dqn()
    for key in agent.network.params:
        agent.network.params[key][:] = 0.0
    assert agent.select_action(np.array([0.3, 0.7]), 0.0, np.random.default_rng(0)) == 0


def test_full_exploration_is_uniform():
    agent = make_dqn()
    rng = np.random.default_rng(123)
    counts = np.zeros(4)
    for _ in range(10_000):
        counts[agent.select_action(np.array([0.5, 0.5]), 1.0, rng)] += 1
    sigma = np.sqrt(10_000 * 0.25 * 0.75)
    assert np.all(np.abs(counts - 2500) <= 3 * sigma)


def test_equal_encodings_get_equal_q_values():
    # The memorylessness that makes boundary aliasing bite for plain DQN.
    agent = make_dqn(seed=4)
    obs = encode_observation(Observation(12, 5), default_diagram())
    np.testing.assert_array_equal(agent.q_values(obs), agent.q_values(obs.copy()))


# -- replay buffer ---------------------------------------------------------------


def test_buffer_evicts_oldest_first():
    buffer = ReplayBuffer(3)
    items = [make_transition([0, 0], 0, 0, [0, 0], False) for _ in range(4)]
    buffer.extend(items[:3])
    assert len(buffer) == 3
    buffer.extend(items[3:])
    assert len(buffer) == 3
    sampled = buffer.sample(3, np.random.default_rng(0))
    assert not any(tr is items[0] for tr in sampled)
    assert any(tr is items[3] for tr in sampled)


def test_buffer_rejects_oversized_sample():
    buffer = ReplayBuffer(5)
    buffer.extend([make_transition([0, 0], 0, 0, [0, 0], False)])
    with pytest.raises(ValueError):
        buffer.sample(2, np.random.default_rng(0))


# -- hindsight relabeling ----------------------------------------------------------


def goal_augmented_transition(reward=0.0, done=False) -> Transition:
    obs = np.array([2 / 31, 22 / 31, 30 / 31, 10 / 31])
    next_obs = np.array([3 / 31, 22 / 31, 30 / 31, 10 / 31])
    return Transition(obs, 1, reward, next_obs, done, (30, 10))


def test_relabeled_transition_becomes_success_toward_reached_state():
    rng = np.random.default_rng(0)
    [relabeled] = her_relabel([goal_augmented_transition()], default_diagram(), rng, fraction=1.0)
    assert relabeled.reward == 1.0 and relabeled.done
    assert relabeled.goal == (3, 22)
    np.testing.assert_allclose(relabeled.obs[2:], [3 / 31, 22 / 31])
    np.testing.assert_allclose(relabeled.next_obs[2:], [3 / 31, 22 / 31])
    np.testing.assert_allclose(relabeled.obs[:2], [2 / 31, 22 / 31])


def test_successful_transitions_pass_through_unchanged():
    rng = np.random.default_rng(0)
    original = goal_augmented_transition(reward=1.0, done=True)
    [result] = her_relabel([original], default_diagram(), rng, fraction=1.0)
    assert result is original


def test_unselected_transitions_pass_through_unchanged():
    rng = np.random.default_rng(0)
    original = goal_augmented_transition()
    [result] = her_relabel([original], default_diagram(), rng, fraction=0.0)
    assert result is original


def test_relabel_count_follows_binomial_bound():
    rng = np.random.default_rng(99)
    transitions = [goal_augmented_transition() for _ in range(10_000)]
    relabeled = her_relabel(transitions, default_diagram(), rng, fraction=0.05)
    count = sum(1 for tr in relabeled if tr.reward == 1.0)
    assert abs(count - 500) <= 3 * np.sqrt(10_000 * 0.05 * 0.95)


def test_relabel_requires_goal_augmentation():
    rng = np.random.default_rng(0)
    plain = make_transition([0.1, 0.2], 0, 0.0, [0.2, 0.2], False)
    with pytest.raises(ValueError, match="goal-augmented"):
        her_relabel([plain], default_diagram(), rng)


# -- TD targets --------------------------------------------------------------------


def zeroed_agent(**overrides) -> DQNAgent:
    agent = make_dqn(**overrides)
    for key in agent.network.params:
        agent.network.params[key][:] = 0.0
    return agent


def test_td_target_for_terminal_transition_is_reward():
    agent = zeroed_agent()
    agent.network.params["b2"][:] = 5.0  # would be bootstrapped if not terminal
    batch = [make_transition([0.1, 0.1], 0, 1.0, [0.2, 0.1], True)]
    np.testing.assert_array_equal(agent.td_targets(batch), [1.0])


def test_td_target_bootstraps_with_discount():
    agent = zeroed_agent()
    agent.network.params["b2"][:] = 1.0  # max_a Q(s', a) = 1 everywhere
    batch = [make_transition([0.1, 0.1], 0, 0.0, [0.2, 0.1], False)]
    np.testing.assert_allclose(agent.td_targets(batch), [0.95])


def test_td_target_zero_when_next_q_zero():
    agent = zeroed_agent()
    batch = [make_transition([0.1, 0.1], 0, 0.0, [0.2, 0.1], False)]
    np.testing.assert_array_equal(agent.td_targets(batch), [0.0])


def test_non_finite_q_aborts():
    agent = zeroed_agent()
    agent.network.params["b2"][:] = np.nan
    batch = [make_transition([0.1, 0.1], 0, 0.0, [0.2, 0.1], False)]
    with pytest.raises(RuntimeError, match="non-finite"):
        agent.td_targets(batch)


# -- training ----------------------------------------------------------------------


def test_perfect_predictions_leave_parameters_unchanged():
    agent = zeroed_agent()
    batch = [make_transition([0.1, 0.1], a, 0.0, [0.2, 0.1], False) for a in range(4)]
    before = {k: v.copy() for k, v in agent.network.params.items()}
    loss = agent.train_on_batch(batch)
    assert loss == 0.0
    for key, value in agent.network.params.items():
        np.testing.assert_array_equal(value, before[key])


def test_batch_gradient_matches_finite_differences():
    agent = make_dqn(seed=7)
    batch = [make_transition([0.3, 0.4], 2, 0.0, [0.4, 0.4], False)]
    targets = agent.td_targets(batch)  # constants under the gradient

    def loss():
        q, _ = agent.network.forward(batch[0].obs)
        return float((q[2] - targets[0]) ** 2)

    _, grads = agent.td_loss_and_grads(batch)
    assert finite_difference_check(agent.network.params, loss, grads, step=1e-5) < 1e-4


def test_drqn_batch_gradient_matches_finite_differences():
    agent = make_drqn(seed=8)
    h0 = agent.network.zero_state()
    tr = make_transition([0.3, 0.4], 1, 0.0, [0.4, 0.4], False)
    tr.h_pre = h0.copy()
    tr.h_post = np.full_like(h0, 0.1)
    batch = [tr]
    targets = agent.td_targets(batch)

    def loss():
        q, _, _ = agent.network.forward(tr.obs, tr.h_pre)
        return float((q[1] - targets[0]) ** 2)

    _, grads = agent.td_loss_and_grads(batch)
    assert finite_difference_check(agent.network.params, loss, grads, step=1e-5) < 1e-4


def test_repeated_training_on_one_transition_drives_loss_down():
    agent = make_dqn(seed=1)
    batch = [make_transition([0.5, 0.5], 3, 1.0, [0.5, 0.6], True)]
    losses = [agent.train_on_batch(batch) for _ in range(500)]
    assert losses[-1] < 1e-3
    assert max(losses[-10:]) < 1e-3
    assert losses[-1] < losses[0]


def test_store_and_maybe_train_respects_warmup():
    agent = make_dqn(warmup=10, batch_size=4, buffer_capacity=16)
    transitions = [make_transition([0.1, 0.1], 0, 0.0, [0.2, 0.1], False) for _ in range(6)]
    stats = agent.store_and_maybe_train(transitions)
    assert stats == {"trained": False, "loss": None, "buffer_size": 6}
    stats = agent.store_and_maybe_train(transitions)
    assert stats["trained"] and stats["loss"] is not None
    assert np.isfinite(stats["loss"]) and stats["loss"] >= 0.0
    assert stats["buffer_size"] == 12


def test_buffer_stays_at_capacity():
    agent = make_dqn(warmup=100, batch_size=4, buffer_capacity=8)
    transitions = [make_transition([0.1, 0.1], 0, 0.0, [0.2, 0.1], False) for _ in range(8)]
    agent.store_and_maybe_train(transitions)
    agent.store_and_maybe_train(transitions[:3])
    assert len(agent.buffer) == 8


# -- episodes ----------------------------------------------------------------------


class ManhattanGreedyAgent:
    """Test double: walks straight toward the scenario goal."""

    recurrent = False
    goal_augmented = False
    hidden_state = None

    def __init__(self, diagram, goal):
        self.diagram = diagram
        self.goal = goal

    def begin_episode(self):
        pass

    def select_action(self, obs_enc, epsilon, rng):
        t = round(obs_enc[0] * (self.diagram.width - 1))
        p = round(obs_enc[1] * (self.diagram.height - 1))
        if t != self.goal[0]:
            return 1 if self.goal[0] > t else 0
        return 3 if self.goal[1] > p else 2


def test_optimal_policy_completes_easy_in_six_steps():
    diagram = default_diagram()
    scenario = default_scenarios()["easy"]
    env = PhaseChangeEnv(diagram, scenario)
    agent = ManhattanGreedyAgent(diagram, scenario.goal)
    record = run_episode(agent, env, EpsilonSchedule.constant(0.0), np.random.default_rng(0),
                         train=False)
    assert record.steps == 6 and record.success and not record.truncated


def test_step_cap_truncates_episode():
    diagram = default_diagram()
    scenario = default_scenarios()["hard"]
    env = PhaseChangeEnv(diagram, scenario, step_cap=10)
    agent = ManhattanGreedyAgent(diagram, scenario.goal)
    record = run_episode(agent, env, EpsilonSchedule.constant(0.0), np.random.default_rng(0),
                         train=False, step_cap=10)
    assert record.steps == 10 and not record.success and record.truncated


def test_training_advances_schedule_once_per_step():
    agent = make_dqn()
    env = PhaseChangeEnv(default_diagram(), default_scenarios()["easy"])
    record = run_episode(agent, env, agent.schedule, np.random.default_rng(0), train=True)
    assert agent.schedule.steps == record.steps


def test_evaluation_leaves_schedule_and_buffer_untouched():
    agent = make_dqn()
    env = PhaseChangeEnv(default_diagram(), default_scenarios()["easy"])
    run_episode(agent, env, EpsilonSchedule.constant(0.2), np.random.default_rng(0), train=False)
    assert agent.schedule.steps == 0
    assert len(agent.buffer) == 0


def test_transitions_record_rewards_and_termination():
    diagram = default_diagram()
    scenario = default_scenarios()["easy"]
    env = PhaseChangeEnv(diagram, scenario)
    agent = ManhattanGreedyAgent(diagram, scenario.goal)
    record = run_episode(agent, env, EpsilonSchedule.constant(0.0), np.random.default_rng(0),
                         train=False)
    assert [tr.reward for tr in record.transitions] == [0, 0, 0, 0, 0, 1]
    assert [tr.done for tr in record.transitions] == [False] * 5 + [True]
    assert all(tr.goal == scenario.goal for tr in record.transitions)


# -- recurrent agent ----------------------------------------------------------------


def test_drqn_hidden_state_resets_and_advances():
    agent = make_drqn(seed=2)
    env = PhaseChangeEnv(default_diagram(), default_scenarios()["easy"])
    record = run_episode(agent, env, EpsilonSchedule.constant(0.2), np.random.default_rng(3),
                         train=False)
    first = record.transitions[0]
    np.testing.assert_array_equal(first.h_pre, np.zeros(8))
    assert not np.array_equal(first.h_post, first.h_pre)
    np.testing.assert_array_equal(record.transitions[1].h_pre, first.h_post)
    agent.begin_episode()
    np.testing.assert_array_equal(agent.hidden_state, np.zeros(8))


def test_drqn_hidden_trajectory_depends_only_on_observations():
    diagram = default_diagram()
    scenario = default_scenarios()["easy"]

    def hidden_trace(seed):
        agent = make_drqn(seed=5)
        env = PhaseChangeEnv(diagram, scenario)
        record = run_episode(agent, env, EpsilonSchedule.constant(0.3),
                             np.random.default_rng(seed), train=False)
        return [tr.h_post.copy() for tr in record.transitions]

    # identical exploration stream => identical observation sequence => identical h
    a, b = hidden_trace(11), hidden_trace(11)
    assert len(a) == len(b)
    for ha, hb in zip(a, b):
        np.testing.assert_array_equal(ha, hb)


def test_drqn_transitions_feed_training():
    agent = make_drqn(seed=6, warmup=5, batch_size=4)
    env = PhaseChangeEnv(default_diagram(), default_scenarios()["easy"])
    record = run_episode(agent, env, agent.schedule, np.random.default_rng(0), train=True)
    stats = agent.store_and_maybe_train(record.transitions)
    if stats["trained"]:
        assert np.isfinite(stats["loss"])
    else:
        assert stats["buffer_size"] < 5


def test_make_agent_variants():
    diagram = default_diagram()
    assert isinstance(make_agent("dqn", diagram), DQNAgent)
    assert isinstance(make_agent("drqn", diagram), DRQNAgent)
    assert make_agent("dqn_her", diagram).goal_augmented
    assert make_agent("drqn_her", diagram).recurrent
    with pytest.raises(ValueError):
        make_agent("sarsa", diagram)


def test_agent_config_validation():
    with pytest.raises(ValueError, match="kind"):
        AgentConfig("dueling", False, HyperParameters())
    with pytest.raises(ValueError, match="gamma"):
        AgentConfig("dqn", False, HyperParameters(gamma=1.5))
    with pytest.raises(ValueError, match="batch"):
        AgentConfig("dqn", False, HyperParameters(batch_size=100, buffer_capacity=10))
