"""Policy-gradient and imitation losses, and the combined update step.

Demonstrations are ``(features, target)`` pairs where ``target`` is either an
action index (behaviour cloning) or a probability vector over the same
actions (KL surrogate). Gradients are returned for losses, i.e. the
direction to descend; ``policy_gradient`` is the exception and returns the
ascent direction of expected return.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Trajectory
from .policies import PolicyParams, action_distribution, log_prob_gradient, logit_gradient

RL_WITH_IL = "RL_with_IL"
IL_ONLY = "IL_only"
RIDGE = 1e-6


@dataclass(frozen=True)
class UpdateConfig:
    mode: str = RL_WITH_IL
    lam: float = 1.0
    learning_rate: float = 0.01
    gamma: float = 1.0
    surrogate: str = "bc"  # "bc" (negative log-likelihood) or "kl"

    def __post_init__(self):
        if self.mode not in (RL_WITH_IL, IL_ONLY):
            raise ValueError(f"mode must be {RL_WITH_IL} or {IL_ONLY}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.surrogate not in ("bc", "kl"):
            raise ValueError("surrogate must be 'bc' or 'kl'")


@dataclass(frozen=True)
class BaselineModel:
    weights: np.ndarray  # last entry is the bias

    def predict(self, features) -> float:
        return float(baseline_features(features) @ self.weights)


def baseline_features(features) -> np.ndarray:
    """State summary for the baseline: the vector itself, or column means of a
    per-action matrix, with a trailing 1."""
    X = np.asarray(features, dtype=float)
    v = X if X.ndim == 1 else X.mean(axis=0)
    return np.append(v, 1.0)


def returns_to_go(rewards: Sequence[float], gamma: float) -> np.ndarray:
    G = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        G[t] = acc
    return G


def fit_linear_baseline(trajs: Sequence[Trajectory], gamma: float) -> BaselineModel:
    """Ridge least squares of discounted return-to-go on state features.

    The bias is not penalised, so constant returns are fitted exactly."""
    if not trajs:
        raise ValueError("baseline needs at least one trajectory")
    rows, targets = [], []
    for traj in trajs:
        G = returns_to_go(traj.rewards, gamma)
        for step, g in zip(traj.steps, G):
            rows.append(baseline_features(step.obs.features))
            targets.append(g)
    if not rows:
        return BaselineModel(np.zeros(1))
    X = np.array(rows)
    y = np.array(targets)
    penalty = RIDGE * np.eye(X.shape[1])
    penalty[-1, -1] = 0.0
    w = np.linalg.solve(X.T @ X + penalty, X.T @ y)
    return BaselineModel(w)


def policy_gradient(policy: PolicyParams, trajs: Sequence[Trajectory],
                    baseline: BaselineModel | None, gamma: float) -> np.ndarray:
    """REINFORCE: mean over trajectories of sum_t grad ln pi(a_t|s_t) gamma^t (G_t - b(s_t))."""
    grad = np.zeros(policy.params.size)
    if not trajs:
        return grad
    for traj in trajs:
        G = returns_to_go(traj.rewards, gamma)
        disc = 1.0
        for step, g in zip(traj.steps, G):
            adv = g - (baseline.predict(step.obs.features) if baseline is not None else 0.0)
            if adv != 0.0:
                a = step.obs.index(step.action)
                grad += disc * adv * log_prob_gradient(policy, step.obs.features, a)
            disc *= gamma
    return grad / len(trajs)


def behavior_cloning_loss(policy: PolicyParams, demos) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood of the demonstrated actions and its gradient."""
    grad = np.zeros(policy.params.size)
    if not demos:
        return 0.0, grad
    loss = 0.0
    for features, action in demos:
        pi = action_distribution(policy, features)
        if not 0 <= action < pi.size:
            raise ValueError(f"demo action {action} out of range")
        loss -= np.log(max(pi[action], np.finfo(float).tiny))
        score = pi.copy()
        score[action] -= 1.0
        grad += logit_gradient(policy, features, score)
    return float(loss / len(demos)), grad / len(demos)


def kl_surrogate_loss(policy: PolicyParams, demos) -> tuple[float, np.ndarray]:
    """Mean KL(target || pi) over demos whose targets are distributions."""
    grad = np.zeros(policy.params.size)
    if not demos:
        return 0.0, grad
    loss = 0.0
    for features, target in demos:
        q = np.asarray(target, dtype=float)
        pi = action_distribution(policy, features)
        if q.shape != pi.shape:
            raise ValueError("target distribution does not match the action count")
        mask = q > 0
        loss += float(np.sum(q[mask] * (np.log(q[mask]) - np.log(np.maximum(pi[mask], 1e-300)))))
        grad += logit_gradient(policy, features, pi - q)
    return loss / len(demos), grad / len(demos)


def surrogate_loss(policy: PolicyParams, demos, kind: str = "bc") -> tuple[float, np.ndarray]:
    return behavior_cloning_loss(policy, demos) if kind == "bc" else kl_surrogate_loss(policy, demos)


def demos_from_trajectories(trajs: Sequence[Trajectory]) -> list:
    return [(s.obs.features, s.obs.index(s.action)) for t in trajs for s in t.steps]


def copier_update(policy: PolicyParams, trajs: Sequence[Trajectory], demos,
                  config: UpdateConfig, baseline: BaselineModel | None = None) -> PolicyParams:
    """One step on L = -(return) + lam * C(demos), or lam * C alone in IL_only mode."""
    _, c_grad = surrogate_loss(policy, demos, config.surrogate)
    loss_grad = config.lam * c_grad
    if config.mode == RL_WITH_IL:
        if not trajs:
            raise ValueError("RL_with_IL updates need trajectories")
        if baseline is None:
            baseline = fit_linear_baseline(trajs, config.gamma)
        loss_grad = loss_grad - policy_gradient(policy, trajs, baseline, config.gamma)
    return policy.replace(policy.params - config.learning_rate * loss_grad)


def pretrain_bc(policy: PolicyParams, demos, learning_rate: float = 0.1, steps: int = 100
                ) -> PolicyParams:
    """Plain gradient descent on the behaviour-cloning loss over a fixed demo set."""
    for _ in range(steps):
        _, g = behavior_cloning_loss(policy, demos)
        policy = policy.replace(policy.params - learning_rate * g)
    return policy
