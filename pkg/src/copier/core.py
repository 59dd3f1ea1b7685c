"""Two-view MDP plumbing: trajectories, view mappings and occupancy counts.

State and action tokens are opaque hashables owned by each environment.
Nothing here looks inside them.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

VIEWS = ("A", "B")


class UnmappableTrajectoryError(ValueError):
    """The target view has no complete trajectory with the same total reward."""


class IncompleteTrajectoryError(UnmappableTrajectoryError):
    """A trajectory that never reached a terminal state was handed to a mapping."""


class RewardMismatchError(AssertionError):
    """A view mapping changed the total reward of a trajectory."""


@dataclass(frozen=True)
class MDPSpec:
    view_id: str
    gamma: float = 1.0
    horizon_cap: int = 1000
    is_terminal: Callable[[Any], bool] | None = None
    # finite-horizon views: reaching horizon_cap ends the episode normally
    time_limit_terminal: bool = False

    def __post_init__(self):
        if self.view_id not in VIEWS:
            raise ValueError(f"view_id must be one of {VIEWS}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.horizon_cap < 1:
            raise ValueError("horizon_cap must be positive")


@dataclass(frozen=True, eq=False)
class Observation:
    """What a policy sees at one state.

    ``features`` is either a single vector (one logit per action, ``actions``
    lists every action) or a matrix with one row per legal action, aligned
    with ``actions``.
    """

    features: np.ndarray
    actions: tuple

    def index(self, action: Hashable) -> int:
        return self.actions.index(action)

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return self.actions == other.actions and np.array_equal(self.features, other.features)

    __hash__ = None


@dataclass(frozen=True)
class Step:
    state: Hashable
    action: Hashable
    reward: float
    obs: Observation | None = None


@dataclass(frozen=True)
class Trajectory:
    view_id: str
    steps: tuple[Step, ...]
    final_state: Hashable
    complete: bool = True
    info: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def rewards(self) -> list[float]:
        return [s.reward for s in self.steps]

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))

    def dumps(self) -> str:
        return "".join(f"{s.state}\t{s.action}\t{s.reward!r}\n" for s in self.steps)


@dataclass(frozen=True)
class ViewMapping:
    """Total map from complete source-view trajectories to target-view ones."""

    source: str
    target: str
    fn: Callable[[Trajectory], Trajectory]

    @property
    def direction(self) -> str:
        return f"{self.source}->{self.target}"


@dataclass
class TwoViewInstance:
    instance_id: str
    env_A: Any
    env_B: Any
    map_AB: ViewMapping
    map_BA: ViewMapping
    shared_actions: bool = False

    def env(self, view: str):
        return self.env_A if view == "A" else self.env_B

    def mapping(self, source: str) -> ViewMapping:
        return self.map_AB if source == "A" else self.map_BA


@dataclass
class OccupancyEstimate:
    table: dict[tuple[Hashable, Hashable], float]
    gamma: float
    n_trajectories: int

    def __getitem__(self, key) -> float:
        return self.table.get(key, 0.0)

    def total_mass(self) -> float:
        return float(sum(self.table.values()))

    def state_mass(self) -> dict[Hashable, float]:
        out: dict[Hashable, float] = defaultdict(float)
        for (s, _), v in self.table.items():
            out[s] += v
        return dict(out)

    def action_distribution(self, state: Hashable, actions: Sequence[Hashable]) -> np.ndarray:
        """Conditional action probabilities at ``state`` recovered from the counts."""
        w = np.array([self.table.get((state, a), 0.0) for a in actions])
        total = w.sum()
        if total <= 0.0:
            raise KeyError(f"state {state!r} carries no occupancy mass")
        return w / total


def total_discounted_reward(traj: Trajectory, gamma: float) -> float:
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    total, disc = 0.0, 1.0
    for step in traj.steps:
        total += disc * step.reward
        disc *= gamma
    return total


def map_trajectory(traj: Trajectory, mapping: ViewMapping) -> Trajectory:
    if traj.view_id != mapping.source:
        raise ValueError(f"trajectory is in view {traj.view_id}, mapping expects {mapping.source}")
    if not traj.complete:
        raise IncompleteTrajectoryError(
            f"view {traj.view_id} trajectory of {len(traj)} steps did not terminate; "
            "only complete trajectories can be mapped")
    out = mapping.fn(traj)
    if out.view_id != mapping.target or not out.complete:
        raise RuntimeError(f"mapping {mapping.direction} produced an invalid trajectory")
    if out.total_reward != traj.total_reward:
        raise RewardMismatchError(
            f"mapping {mapping.direction} changed total reward "
            f"{traj.total_reward!r} -> {out.total_reward!r}")
    return out


def estimate_occupancy(trajs: Sequence[Trajectory], gamma: float,
                       action_probs: Sequence[Sequence[np.ndarray]] | None = None
                       ) -> OccupancyEstimate:
    """Average discounted visit counts of (state, action) pairs.

    With ``action_probs`` (one distribution over ``step.obs.actions`` per step)
    each visit spreads its weight over actions by those probabilities instead
    of crediting the sampled action; the expectation is unchanged.
    """
    if not trajs:
        raise ValueError("occupancy needs at least one trajectory")
    views = {t.view_id for t in trajs}
    if len(views) != 1:
        raise ValueError("all trajectories must come from the same view")
    table: dict[tuple[Hashable, Hashable], float] = defaultdict(float)
    for k, traj in enumerate(trajs):
        disc = 1.0
        for t, step in enumerate(traj.steps):
            if action_probs is None:
                table[(step.state, step.action)] += disc
            else:
                for a, p in zip(step.obs.actions, action_probs[k][t]):
                    if p > 0.0:
                        table[(step.state, a)] += disc * float(p)
            disc *= gamma
    m = len(trajs)
    return OccupancyEstimate({key: v / m for key, v in table.items()}, gamma, m)


def mapped_occupancy(trajs: Sequence[Trajectory], mapping: ViewMapping,
                     gamma: float) -> OccupancyEstimate:
    if not trajs:
        raise ValueError("occupancy needs at least one trajectory")
    return estimate_occupancy([map_trajectory(t, mapping) for t in trajs], gamma)


def map_all(trajs: Iterable[Trajectory], mapping: ViewMapping) -> list[Trajectory]:
    return [map_trajectory(t, mapping) for t in trajs]
