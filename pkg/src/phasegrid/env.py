"""Grid world over a material phase diagram.

The state is a cell on a (temperature, pressure) grid. Within a phase each
action moves one cell. Cells lying on a phase boundary behave differently in
semi-Markov mode: exiting through the boundary takes an ordered pair of
actions (an energy-priming action followed by the move itself), and the
priming progress is hidden from the observation. In Markov mode boundary
cells behave like any other cell and the observation is the full state.

Boundary crossing rule (semi-Markov). A boundary segment has a crossing axis:
temperature for a vertical segment, pressure for a horizontal one. To cross in
the positive direction the agent first applies the positive action of the
*other* axis, which is absorbed as latent energy and leaves the position
unchanged, then the positive action of the crossing axis:

    +P: Q+ then W+        -P: Q- then W-
    +T: W+ then Q+        -T: W- then Q-

A crossing-axis action without the matching primed sign does nothing and
clears any priming. Re-priming with the same sign is idempotent; priming with
the opposite sign overwrites. Any position change clears the priming, so it
never survives leaving the boundary cell.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Action(enum.IntEnum):
    """Remove/add heat (temperature axis) and negative/positive work (pressure axis)."""

    Q_MINUS = 0
    Q_PLUS = 1
    W_MINUS = 2
    W_PLUS = 3


# (dt, dp) applied by each action inside a phase, indexed by action value.
ACTION_DELTAS: tuple[tuple[int, int], ...] = ((-1, 0), (1, 0), (0, -1), (0, 1))

N_ACTIONS = 4


class Mode(enum.Enum):
    SEMI_MARKOV = "semi"
    MARKOV = "markov"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        for mode in cls:
            if mode.value == text:
                return mode
        raise ValueError(f"unknown mode {text!r}, expected 'semi' or 'markov'")


class LatentFlag(enum.IntEnum):
    """Hidden priming state of a boundary cell; NONE everywhere else."""

    NONE = 0
    PRIMED_POSITIVE = 1
    PRIMED_NEGATIVE = 2


@dataclass(frozen=True)
class BoundarySegment:
    """A straight run of boundary cells.

    A vertical segment fixes a temperature column (crossed along the
    temperature axis); a horizontal segment fixes a pressure row (crossed
    along the pressure axis). ``span`` is the inclusive cell range along the
    other axis.
    """

    orientation: str  # "vertical" | "horizontal"
    fixed_index: int
    span: tuple[int, int]

    def __post_init__(self) -> None:
        if self.orientation not in ("vertical", "horizontal"):
            raise ValueError(f"orientation must be 'vertical' or 'horizontal', got {self.orientation!r}")
        lo, hi = self.span
        if lo > hi:
            raise ValueError(f"empty span {self.span}")

    def cells(self) -> list[tuple[int, int]]:
        lo, hi = self.span
        if self.orientation == "vertical":
            return [(self.fixed_index, p) for p in range(lo, hi + 1)]
        return [(t, self.fixed_index) for t in range(lo, hi + 1)]


@dataclass(frozen=True)
class PhaseDiagram:
    """Grid geometry plus the boundary cells and their crossing rules."""

    width: int
    height: int
    boundaries: tuple[BoundarySegment, ...] = ()
    _cell_grid: list = field(init=False, repr=False, compare=False, hash=False, default_factory=list)

    def __post_init__(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.width}x{self.height}")
        grid: list[list[BoundarySegment | None]] = [[None] * self.height for _ in range(self.width)]
        for seg in self.boundaries:
            for cell in seg.cells():
                t, p = cell
                if not (0 <= t < self.width and 0 <= p < self.height):
                    raise ValueError(f"boundary cell {cell} outside {self.width}x{self.height} grid")
                if grid[t][p] is not None:
                    raise ValueError(f"boundary segments overlap at cell {cell}")
                grid[t][p] = seg
        object.__setattr__(self, "_cell_grid", grid)

    def boundary_at(self, t: int, p: int) -> BoundarySegment | None:
        return self._cell_grid[t][p]

    def contains(self, t: int, p: int) -> bool:
        return 0 <= t < self.width and 0 <= p < self.height


@dataclass(frozen=True)
class Scenario:
    """Named start/goal pair together with the dynamics mode."""

    name: str
    start: tuple[int, int]
    goal: tuple[int, int]
    mode: Mode = Mode.SEMI_MARKOV

    def validate(self, diagram: PhaseDiagram) -> None:
        for label, cell in (("start", self.start), ("goal", self.goal)):
            if not diagram.contains(*cell):
                raise ValueError(f"scenario {self.name!r}: {label} {cell} outside the grid")
        if self.start == self.goal:
            raise ValueError(f"scenario {self.name!r}: start equals goal")


@dataclass(frozen=True)
class EnvState:
    """Full latent state: grid position plus the hidden priming flag."""

    t: int
    p: int
    flag: LatentFlag = LatentFlag.NONE


@dataclass(frozen=True)
class Observation:
    """Visible projection of the state: the position, never the priming flag."""

    t: int
    p: int
    goal_t: int | None = None
    goal_p: int | None = None


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: int
    done: bool
    truncated: bool


def _clamped_move(diagram: PhaseDiagram, t: int, p: int, action: int) -> tuple[int, int]:
    dt, dp = ACTION_DELTAS[action]
    return (
        min(max(t + dt, 0), diagram.width - 1),
        min(max(p + dp, 0), diagram.height - 1),
    )


def transition(diagram: PhaseDiagram, mode: Mode, state: EnvState, action: int) -> EnvState:
    """Apply one action to a latent state; pure and deterministic.

    Markov mode and non-boundary cells: unit move, clamped at the grid edge.
    Semi-Markov boundary cells: the crossing rule documented at module level.
    """
    if not 0 <= action < N_ACTIONS:
        raise ValueError(f"invalid action {action!r}")
    segment = diagram._cell_grid[state.t][state.p]
    if segment is None or mode is Mode.MARKOV:
        t, p = _clamped_move(diagram, state.t, state.p, action)
        return EnvState(t, p, LatentFlag.NONE)

    # Q-actions (0, 1) cross a vertical segment; W-actions (2, 3) a horizontal one.
    on_crossing_axis = (action < 2) == (segment.orientation == "vertical")
    positive = action in (1, 3)
    if not on_crossing_axis:
        # Other-axis action: absorbed as latent energy, primes its own sign.
        primed = LatentFlag.PRIMED_POSITIVE if positive else LatentFlag.PRIMED_NEGATIVE
        return EnvState(state.t, state.p, primed)

    needed = LatentFlag.PRIMED_POSITIVE if positive else LatentFlag.PRIMED_NEGATIVE
    if state.flag is not needed:
        # Unprimed (or wrongly primed) crossing attempt: stall and clear.
        return EnvState(state.t, state.p, LatentFlag.NONE)
    t, p = _clamped_move(diagram, state.t, state.p, action)
    return EnvState(t, p, LatentFlag.NONE)


DEFAULT_STEP_CAP = 10_000


class PhaseChangeEnv:
    """Episodic environment over a phase diagram.

    One instance serves one episode sequence on a single thread; instances
    are independent. ``reset`` must be called before ``step``.
    """

    def __init__(
        self,
        diagram: PhaseDiagram,
        scenario: Scenario,
        goal_augmented: bool = False,
        step_cap: int = DEFAULT_STEP_CAP,
    ):
        scenario.validate(diagram)
        if step_cap < 1:
            raise ValueError(f"step_cap must be positive, got {step_cap}")
        self.diagram = diagram
        self.scenario = scenario
        self.goal_augmented = goal_augmented
        self.step_cap = step_cap
        self._state: EnvState | None = None
        self._steps = 0
        self._finished = False

    @property
    def mode(self) -> Mode:
        return self.scenario.mode

    @property
    def state(self) -> EnvState:
        if self._state is None:
            raise RuntimeError("environment used before reset()")
        return self._state

    @property
    def steps_taken(self) -> int:
        return self._steps

    def reset(self) -> Observation:
        self._state = EnvState(*self.scenario.start, LatentFlag.NONE)
        self._steps = 0
        self._finished = False
        return self.observe()

    def observe(self) -> Observation:
        state = self.state
        if self.goal_augmented:
            goal_t, goal_p = self.scenario.goal
            return Observation(state.t, state.p, goal_t, goal_p)
        return Observation(state.t, state.p)

    def step(self, action: Action | int) -> StepResult:
        if self._state is None:
            raise RuntimeError("step() before reset()")
        if self._finished:
            raise RuntimeError("step() on a terminated episode; call reset()")
        self._state = transition(self.diagram, self.mode, self._state, int(action))
        self._steps += 1
        at_goal = (self._state.t, self._state.p) == self.scenario.goal
        truncated = not at_goal and self._steps >= self.step_cap
        self._finished = at_goal or truncated
        return StepResult(self.observe(), 1 if at_goal else 0, at_goal, truncated)


def encode_observation(obs: Observation, diagram: PhaseDiagram) -> np.ndarray:
    """Scale each coordinate to [0, 1] by its axis maximum.

    Length 2 for plain observations, 4 when goal-augmented.
    """
    t_max = diagram.width - 1.0
    p_max = diagram.height - 1.0
    if obs.goal_t is None:
        return np.array((obs.t / t_max, obs.p / p_max))
    return np.array((obs.t / t_max, obs.p / p_max, obs.goal_t / t_max, obs.goal_p / p_max))


def observation_dim(goal_augmented: bool) -> int:
    return 4 if goal_augmented else 2


def default_diagram() -> PhaseDiagram:
    """32x32 grid with two full-height phase boundaries at t=12 and t=22."""
    return PhaseDiagram(
        width=32,
        height=32,
        boundaries=(
            BoundarySegment("vertical", 12, (0, 31)),
            BoundarySegment("vertical", 22, (0, 31)),
        ),
    )


def default_scenarios(mode: Mode = Mode.SEMI_MARKOV) -> dict[str, Scenario]:
    """Shared goal (30, 10); starts crossing two, one, and zero boundaries."""
    goal = (30, 10)
    return {
        "hard": Scenario("hard", (2, 22), goal, mode),
        "mod": Scenario("mod", (16, 14), goal, mode),
        "easy": Scenario("easy", (26, 12), goal, mode),
    }


def small_diagram() -> PhaseDiagram:
    """16x16 reduction of the default geometry, boundaries at t=6 and t=11."""
    return PhaseDiagram(
        width=16,
        height=16,
        boundaries=(
            BoundarySegment("vertical", 6, (0, 15)),
            BoundarySegment("vertical", 11, (0, 15)),
        ),
    )


def small_scenarios(mode: Mode = Mode.SEMI_MARKOV) -> dict[str, Scenario]:
    """Scaled-down analogs of the default scenarios on the 16x16 grid."""
    goal = (15, 5)
    return {
        "hard": Scenario("hard", (1, 11), goal, mode),
        "mod": Scenario("mod", (8, 7), goal, mode),
        "easy": Scenario("easy", (13, 6), goal, mode),
    }
