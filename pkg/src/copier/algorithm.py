"""The co-training loop, its two exchange rules and the final two-policy evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Trajectory, TwoViewInstance, UnmappableTrajectoryError, map_trajectory
from .learners import IL_ONLY, UpdateConfig, copier_update, demos_from_trajectories
from .policies import PolicyParams, action_distribution, greedy_action, sample_trajectory

GENERAL, SHARED = "general", "shared_action"
A_TO_B, B_TO_A, BOTH, NONE = "A->B", "B->A", "both", ""
VIEW_CODE = {"A": 0, "B": 1}


@dataclass
class ExchangeResult:
    demos_A_to_B: list  # received by B
    demos_B_to_A: list  # received by A
    eta_hat_A: float
    eta_hat_B: float
    direction: str
    n_mapped: int = 0    # trajectories mapped with their total reward checked
    n_rejected: int = 0  # winning-side trajectories the mapping could not translate


def _eta_hat(trajs: Sequence[Trajectory]) -> float:
    return float(np.mean([t.total_reward for t in trajs]))


def exchange_general(trajs_A: Sequence[Trajectory], trajs_B: Sequence[Trajectory],
                     instance: TwoViewInstance) -> ExchangeResult:
    """The better view's trajectories, mapped, become the other view's
    demonstrations. Ties go to B (strict comparison)."""
    if not trajs_A or not trajs_B:
        raise ValueError("exchange needs trajectories from both views")
    eta_A, eta_B = _eta_hat(trajs_A), _eta_hat(trajs_B)
    if eta_A > eta_B:
        direction, source = A_TO_B, trajs_A
    else:
        direction, source = B_TO_A, trajs_B
    mapping = instance.mapping(source[0].view_id)
    demos, rejected = [], 0
    for t in source:
        try:
            demos.append(map_trajectory(t, mapping))
        except UnmappableTrajectoryError:
            rejected += 1
    if direction == A_TO_B:
        return ExchangeResult(demos, [], eta_A, eta_B, direction, len(demos), rejected)
    return ExchangeResult([], demos, eta_A, eta_B, direction, len(demos), rejected)


def interactive_labels(trajs: Sequence[Trajectory], query_policy: PolicyParams,
                       soft: bool = False) -> list:
    """(features, pi(s)) for every state of every trajectory, duplicates kept.

    ``soft`` labels with the full action distribution instead of the argmax.
    """
    out = []
    for t in trajs:
        for s in t.steps:
            if soft:
                out.append((s.obs.features, action_distribution(query_policy, s.obs.features)))
            else:
                out.append((s.obs.features, greedy_action(query_policy, s.obs.features)))
    return out


def _relabel_for_receiver(trajs, mapped, labels) -> list:
    feats = [s.obs.features for t in trajs for s in t.steps]
    if len(feats) != len(labels):
        raise ValueError("shared-action mappings must keep steps aligned")
    return [(f, lab) for f, (_, lab) in zip(feats, labels)]


def exchange_special(trajs_A: Sequence[Trajectory], trajs_B: Sequence[Trajectory],
                     policy_A: PolicyParams, policy_B: PolicyParams,
                     instance: TwoViewInstance, soft: bool = False) -> ExchangeResult:
    """Each policy labels the other's visited states, mapped into its own view.

    The labels are exactly those of ``interactive_labels`` on the mapped
    trajectories; they are paired with the receiver's own features of the same
    steps so the receiver can train on them.
    """
    mapped_B = [map_trajectory(t, instance.map_BA) for t in trajs_B]
    mapped_A = [map_trajectory(t, instance.map_AB) for t in trajs_A]
    to_B = _relabel_for_receiver(trajs_B, mapped_B, interactive_labels(mapped_B, policy_A, soft))
    to_A = _relabel_for_receiver(trajs_A, mapped_A, interactive_labels(mapped_A, policy_B, soft))
    eta_A = _eta_hat(trajs_A) if trajs_A else float("nan")
    eta_B = _eta_hat(trajs_B) if trajs_B else float("nan")
    return ExchangeResult(to_B, to_A, eta_A, eta_B, BOTH, len(mapped_A) + len(mapped_B), 0)


# ---------------------------------------------------------------------- training loop

@dataclass(frozen=True)
class CopierConfig:
    iterations: int = 10
    m: int = 4  # rollouts of pi_A per iteration
    n: int = 4  # rollouts of pi_B per iteration
    update_A: UpdateConfig = field(default_factory=UpdateConfig)
    update_B: UpdateConfig = field(default_factory=UpdateConfig)
    exchange_mode: str = GENERAL
    seed: int = 0
    views: str = "both"  # "both" trains by co-training; "A" or "B" trains one view alone

    def __post_init__(self):
        if self.iterations < 1 or self.m < 1 or self.n < 1:
            raise ValueError("iterations, m and n must be positive")
        if self.exchange_mode not in (GENERAL, SHARED):
            raise ValueError(f"exchange_mode must be {GENERAL} or {SHARED}")
        if self.views not in ("both", "A", "B"):
            raise ValueError("views must be 'both', 'A' or 'B'")
        if self.exchange_mode == SHARED and self.update_A.surrogate != self.update_B.surrogate:
            raise ValueError("shared-action exchange needs one surrogate for both views")


@dataclass
class IterationRecord:
    iteration: int
    instance_id: str
    eta_hat_A: float
    eta_hat_B: float
    direction: str
    n_demos_A: int
    n_demos_B: int
    n_mapped: int
    n_rejected: int


@dataclass
class TrainHistory:
    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


def rollouts(policy: PolicyParams, env, count: int, seed: int, iteration: int, view: str
             ) -> list[Trajectory]:
    return [sample_trajectory(policy, env,
                              rng=np.random.default_rng([seed, iteration, VIEW_CODE[view], j]))
            for j in range(count)]


# (instance, view, own trajectories) -> extra demonstrations, e.g. expert labels
ExpertFn = Callable[[TwoViewInstance, str, list], list]


def copier_train(sampler, policy_A: PolicyParams, policy_B: PolicyParams, config: CopierConfig,
                 expert: ExpertFn | None = None, on_iteration: Callable | None = None
                 ) -> tuple[PolicyParams, PolicyParams, TrainHistory]:
    """Run the co-training loop for ``config.iterations`` iterations.

    ``sampler`` is a sequence of instances (drawn uniformly) or a callable
    taking an rng. Demonstrations are replaced every iteration.
    ``on_iteration(record, instance, trajs_A, trajs_B, before, after)`` is
    called after each update.
    """
    history = TrainHistory()
    soft = config.update_A.surrogate == "kl"
    for it in range(config.iterations):
        rng = np.random.default_rng([config.seed, it, 2])
        if callable(sampler):
            instance = sampler(rng)
        else:
            if not len(sampler):
                raise ValueError("sampler holds no instances")
            instance = sampler[int(rng.integers(len(sampler)))]
        train_A = config.views in ("both", "A")
        train_B = config.views in ("both", "B")
        trajs_A = rollouts(policy_A, instance.env_A, config.m, config.seed, it, "A") if train_A else []
        trajs_B = rollouts(policy_B, instance.env_B, config.n, config.seed, it, "B") if train_B else []

        if config.views != "both":
            ex = ExchangeResult([], [], _eta_hat(trajs_A) if trajs_A else float("nan"),
                                _eta_hat(trajs_B) if trajs_B else float("nan"), NONE)
            demos_A, demos_B = [], []
        elif config.exchange_mode == GENERAL:
            ex = exchange_general(trajs_A, trajs_B, instance)
            demos_A = demos_from_trajectories(ex.demos_B_to_A)
            demos_B = demos_from_trajectories(ex.demos_A_to_B)
        else:
            ex = exchange_special(trajs_A, trajs_B, policy_A, policy_B, instance, soft)
            demos_A, demos_B = ex.demos_B_to_A, ex.demos_A_to_B

        if expert is not None:
            if train_A:
                demos_A = demos_A + expert(instance, "A", trajs_A)
            if train_B:
                demos_B = demos_B + expert(instance, "B", trajs_B)
        before = (policy_A, policy_B)
        if train_A:
            policy_A = copier_update(policy_A, trajs_A, demos_A, config.update_A)
        if train_B:
            policy_B = copier_update(policy_B, trajs_B, demos_B, config.update_B)
        record = IterationRecord(it, instance.instance_id, ex.eta_hat_A, ex.eta_hat_B,
                                 ex.direction, len(demos_A), len(demos_B), ex.n_mapped,
                                 ex.n_rejected)
        history.records.append(record)
        if on_iteration is not None:
            on_iteration(record, instance, trajs_A, trajs_B, before, (policy_A, policy_B))
    return policy_A, policy_B, history


# ------------------------------------------------------------------------ evaluation

def best_rollout(policy: PolicyParams, env, seeds=None, greedy_seed: int = 0) -> Trajectory:
    """Greedy rollout when ``seeds`` is None (environment noise drawn from
    ``greedy_seed``), else the best of one sampled rollout per seed. Solved
    trajectories beat unsolved ones."""
    if seeds is None:
        trajs = [sample_trajectory(policy, env, seed=greedy_seed, greedy=True)]
    else:
        trajs = [sample_trajectory(policy, env, seed=s) for s in seeds]
    return max(trajs, key=lambda t: (solved(t), t.total_reward))


def solved(t: Trajectory) -> bool:
    return t.complete and bool(t.info.get("solved", True))


def better_of(ta: Trajectory, tb: Trajectory) -> tuple[Trajectory, str]:
    if (solved(tb), tb.total_reward) > (solved(ta), ta.total_reward):
        return tb, "B"
    return ta, "A"


def copier_final(policy_A: PolicyParams, policy_B: PolicyParams, instance: TwoViewInstance,
                 seeds=None, greedy_seed: int = 0) -> tuple[Trajectory, str]:
    """Run both policies and keep the better solution; ties go to view A."""
    ta = best_rollout(policy_A, instance.env_A, seeds, greedy_seed)
    tb = best_rollout(policy_B, instance.env_B, seeds, greedy_seed)
    return better_of(ta, tb)
