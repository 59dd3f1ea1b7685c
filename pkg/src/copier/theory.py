"""Sample estimates of the co-training improvement terms and the
disagreement-based PAC bound on a co-trained policy's error rate.

All maxima over states are taken over the states visited by the supplied
rollouts, so they under-estimate the true maxima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .core import (Trajectory, TwoViewInstance, UnmappableTrajectoryError, estimate_occupancy,
                   map_trajectory, total_discounted_reward)
from .learners import BaselineModel, fit_linear_baseline, returns_to_go
from .policies import PolicyParams, action_distribution, divergence, greedy_action


# ------------------------------------------------------------------- improvement terms

@dataclass
class InstanceRollouts:
    instance: TwoViewInstance
    trajs_A: Sequence[Trajectory]
    trajs_B: Sequence[Trajectory]


@dataclass
class ImprovementDiagnostics:
    alpha_hat_A: float
    alpha_hat_B: float
    beta_hat_D1: float  # JS(pi_A || pi_B), A's occupancy mapped into view B, over D1
    beta_hat_D2: float  # JS(pi_B || pi_A), B's occupancy mapped into view A, over D2
    delta_hat_1: float
    delta_hat_2: float
    eps_hat_A_D: float
    eps_hat_B_D: float
    eps_hat_A_D1: float
    eps_hat_B_D2: float
    gamma_A: float
    gamma_B: float
    n_D1: int
    n_D2: int
    applicable: bool
    penalty_A: float = float("nan")
    penalty_B: float = float("nan")


def _max_kl_between(before: PolicyParams, after: PolicyParams, trajs) -> float:
    best = 0.0
    for t in trajs:
        for s in t.steps:
            best = max(best, divergence(action_distribution(before, s.obs.features),
                                        action_distribution(after, s.obs.features), "KL"))
    return best


def mapped_max_js(trajs: Sequence[Trajectory], source_policy: PolicyParams,
                  target_policy: PolicyParams, instance: TwoViewInstance, gamma: float) -> float:
    """max_s JS(pi_source(s) || pi_target(s)) with the source occupancy counted
    in the target view.

    The source policy's action distribution at a target-view state is the
    conditional of its mapped discounted counts. With a shared action space the
    mapping keeps states and actions, and every visit to a state carries the
    same source distribution, so that conditional is exactly the source
    policy's distribution there; it is read off directly, which makes
    identical policies score exactly 0.
    """
    if not trajs:
        return 0.0
    mapping = instance.mapping(trajs[0].view_id)
    kept, mapped = [], []
    for t in trajs:
        try:
            mapped.append(map_trajectory(t, mapping))
            kept.append(t)
        except UnmappableTrajectoryError:
            continue  # nothing to translate (e.g. a search with no incumbent)
    if not mapped:
        return 0.0
    obs_at: dict[Hashable, object] = {}
    source_obs: dict[Hashable, object] = {}
    for t, u in zip(kept, mapped):
        for s in u.steps:
            obs_at.setdefault(s.state, s.obs)
        if instance.shared_actions:
            for s in t.steps:
                source_obs.setdefault(s.state, s.obs)
    occ = None if instance.shared_actions else estimate_occupancy(mapped, gamma)
    best = 0.0
    for state, obs in obs_at.items():
        if occ is None:
            p = action_distribution(source_policy, source_obs[state].features)
        else:
            p = occ.action_distribution(state, obs.actions)
        q = action_distribution(target_policy, obs.features)
        best = max(best, divergence(p, q, "JS"))
    return best


def _max_abs_advantage(trajs, baseline: BaselineModel | None, gamma: float) -> float:
    best = 0.0
    for t in trajs:
        G = returns_to_go(t.rewards, gamma)
        for s, g in zip(t.steps, G):
            b = baseline.predict(s.obs.features) if baseline is not None else 0.0
            best = max(best, abs(g - b))
    return best


def improvement_diagnostics(batches: Sequence[InstanceRollouts],
                            before: tuple[PolicyParams, PolicyParams],
                            after: tuple[PolicyParams, PolicyParams],
                            gammas: tuple[float, float] = (1.0, 1.0)) -> ImprovementDiagnostics:
    """Estimate the improvement-bound terms from per-instance rollouts of the
    ``before`` policies. D1/D2 are unnormalized parts, so their expectations are
    sums over the part divided by the total instance count."""
    if not batches:
        raise ValueError("need at least one instance")
    for b in batches:
        if not b.trajs_A or not b.trajs_B:
            raise ValueError(f"instance {b.instance.instance_id} is missing rollouts")
    pA, pB = before
    gA, gB = gammas
    m = len(batches)
    all_A = [t for b in batches for t in b.trajs_A]
    all_B = [t for b in batches for t in b.trajs_B]
    base_A = fit_linear_baseline(all_A, gA)
    base_B = fit_linear_baseline(all_B, gB)

    alpha_A = alpha_B = beta_1 = beta_2 = delta_1 = delta_2 = 0.0
    eps_A = eps_B = eps_A1 = eps_B2 = 0.0
    n1 = n2 = 0
    for b in batches:
        eta_A = float(np.mean([total_discounted_reward(t, gA) for t in b.trajs_A]))
        eta_B = float(np.mean([total_discounted_reward(t, gB) for t in b.trajs_B]))
        alpha_A += _max_kl_between(pA, after[0], b.trajs_A) / m
        alpha_B += _max_kl_between(pB, after[1], b.trajs_B) / m
        e_A = _max_abs_advantage(b.trajs_A, base_A, gA)
        e_B = _max_abs_advantage(b.trajs_B, base_B, gB)
        eps_A, eps_B = max(eps_A, e_A), max(eps_B, e_B)
        if eta_A >= eta_B:
            n1 += 1
            delta_1 += (eta_A - eta_B) / m
            beta_1 += mapped_max_js(b.trajs_A, pA, pB, b.instance, gB) / m
            eps_A1 = max(eps_A1, e_A)
        else:
            n2 += 1
            delta_2 += (eta_B - eta_A) / m
            beta_2 += mapped_max_js(b.trajs_B, pB, pA, b.instance, gA) / m
            eps_B2 = max(eps_B2, e_B)

    applicable = gA < 1.0 and gB < 1.0
    out = ImprovementDiagnostics(alpha_A, alpha_B, beta_1, beta_2, delta_1, delta_2,
                                 eps_A, eps_B, eps_A1, eps_B2, gA, gB, n1, n2, applicable)
    if applicable:
        out.penalty_A = 2 * gA * (4 * beta_2 * eps_B2 + alpha_A * eps_A) / (1 - gA) ** 2
        out.penalty_B = 2 * gB * (4 * beta_1 * eps_A1 + alpha_B * eps_B) / (1 - gB) ** 2
    return out


# --------------------------------------------------------------- disagreement bound

@dataclass
class DisagreementStats:
    k: int
    n_A: np.ndarray      # N(a^A = i)
    n_B: np.ndarray      # N(a^B = i)
    n_agree: np.ndarray  # N(a^A = i, a^B = i)

    def __post_init__(self):
        self.n_A = np.asarray(self.n_A, dtype=int)
        self.n_B = np.asarray(self.n_B, dtype=int)
        self.n_agree = np.asarray(self.n_agree, dtype=int)
        for arr in (self.n_A, self.n_B, self.n_agree):
            if arr.shape != (self.k,) or np.any(arr < 0):
                raise ValueError("counts must be k nonnegative integers")
        if np.any(self.n_agree > np.minimum(self.n_A, self.n_B)):
            raise ValueError("agreements exceed a marginal count")
        if self.n_A.sum() != self.n_B.sum():
            raise ValueError("both policies must be queried on the same states")

    @property
    def N(self) -> int:
        return int(self.n_A.sum())


def disagreement_counts(trajs_A: Sequence[Trajectory], instance: TwoViewInstance,
                        policy_A: PolicyParams, policy_B: PolicyParams) -> DisagreementStats:
    """Greedy actions of both policies at every state of the A-trajectories,
    pi_B queried on the states of their mappings into view B."""
    k = policy_A.n_actions
    if policy_B.n_actions != k:
        raise ValueError("policies must share the action space")
    n_A, n_B, n_agree = np.zeros(k, int), np.zeros(k, int), np.zeros(k, int)
    for t in trajs_A:
        mapped = map_trajectory(t, instance.map_AB)
        if len(mapped) != len(t):
            raise ValueError("shared-action mappings must keep steps aligned")
        for sa, sb in zip(t.steps, mapped.steps):
            a = greedy_action(policy_A, sa.obs.features)
            b = greedy_action(policy_B, sb.obs.features)
            n_A[a] += 1
            n_B[b] += 1
            n_agree[a] += a == b
    return DisagreementStats(k, n_A, n_B, n_agree)


@dataclass
class BoundReport:
    eps: np.ndarray
    zeta: np.ndarray
    b: np.ndarray
    defined: np.ndarray
    valid: np.ndarray
    max_b: float
    sigma: float
    bits_A: int
    bits_B: int
    status: str  # "ok" or "vacuous"

    @property
    def all_valid(self) -> bool:
        """Every action with data meets zeta > 0 and b <= 1."""
        return bool(np.all(self.valid[self.defined])) and self.status == "ok"


def pac_disagreement_bound(stats: DisagreementStats, bits_A: int, bits_B: int,
                           sigma: float) -> BoundReport:
    if not 0.0 < sigma < 1.0:
        raise ValueError("sigma must lie in (0, 1)")
    k = stats.k
    defined = stats.n_B > 0
    eps = np.full(k, np.nan)
    zeta = np.full(k, np.nan)
    b = np.full(k, np.nan)
    complexity = math.log(2) * (bits_A + bits_B) + math.log(2 * k / sigma)
    for i in np.flatnonzero(defined):
        nb = stats.n_B[i]
        agree = stats.n_agree[i] / nb
        disagree = (nb - stats.n_agree[i]) / nb
        eps[i] = math.sqrt(complexity / (2 * nb))
        zeta[i] = agree - disagree - 2 * eps[i]
        if zeta[i] > 0:
            b[i] = (disagree + eps[i]) / zeta[i]
    valid = defined & (zeta > 0) & (b <= 1)
    if valid.any():
        return BoundReport(eps, zeta, b, defined, valid, float(np.max(b[valid])), sigma,
                           bits_A, bits_B, "ok")
    return BoundReport(eps, zeta, b, defined, valid, float("nan"), sigma, bits_A, bits_B,
                       "vacuous")


@dataclass(frozen=True)
class GapBoundParams:
    u: float
    T: int
    epsilon: float

    def __post_init__(self):
        if self.u < 0 or self.T < 1 or not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("need u >= 0, T >= 1 and epsilon in [0, 1]")


def performance_gap_bound(params: GapBoundParams) -> float:
    return params.u * params.T * params.epsilon


def measure_policy_error(policy: PolicyParams, optimal_action: Callable[[Hashable], int],
                         trajs: Sequence[Trajectory], gamma: float = 1.0) -> float:
    """Visit-weighted fraction of states where the greedy action differs from
    the optimal one."""
    wrong = total = 0.0
    for t in trajs:
        w = 1.0
        for s in t.steps:
            try:
                target = optimal_action(s.state)
            except KeyError as exc:
                raise ValueError(f"state {s.state!r} is outside the optimal policy's domain") \
                    from exc
            a = s.obs.actions[greedy_action(policy, s.obs.features)]
            total += w
            wrong += w * (a != target)
            w *= gamma
    if total == 0.0:
        raise ValueError("no states visited")
    return wrong / total


def disagreement_from_visits(counts: np.ndarray, actions_A: np.ndarray,
                             actions_B: np.ndarray, k: int) -> DisagreementStats:
    """Disagreement counts when both greedy policies are functions of a state
    index and ``counts`` holds visits per state."""
    counts = np.asarray(counts, dtype=int)
    n_A = np.bincount(actions_A, weights=counts, minlength=k).astype(int)
    n_B = np.bincount(actions_B, weights=counts, minlength=k).astype(int)
    same = actions_A == actions_B
    n_agree = np.bincount(actions_A[same], weights=counts[same], minlength=k).astype(int)
    return DisagreementStats(k, n_A, n_B, n_agree)


def policy_error_from_visits(counts: np.ndarray, actions: np.ndarray,
                             optimal: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=float)
    if counts.sum() == 0:
        raise ValueError("no states visited")
    return float(counts[actions != optimal].sum() / counts.sum())
