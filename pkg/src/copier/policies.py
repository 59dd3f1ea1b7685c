"""Categorical softmax policies: tabular, linear and one-hidden-layer tanh.

A policy maps a feature array to logits. Two input shapes are accepted:

* a vector of length ``n_features`` -> ``n_actions`` logits (fixed action set);
* a matrix ``(m, n_features)`` with one row per candidate action and
  ``n_actions == 1`` -> one logit per row (shared scorer over a variable set,
  used for vertex selection and node selection).

The parameter vector is flat; ``unpack`` gives named views into it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import MDPSpec, Observation, Step, Trajectory

ARCHS = ("tabular", "linear", "mlp")
BITS_PER_PARAM = 32
INIT_SCALE = 0.05


@dataclass(frozen=True, eq=False)
class PolicyParams:
    arch: str
    params: np.ndarray
    n_features: int
    n_actions: int
    hidden: int = 0

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r}")
        params = np.asarray(self.params, dtype=float).reshape(-1)
        params.setflags(write=False)
        object.__setattr__(self, "params", params)
        if params.size != param_count(self.arch, self.n_features, self.n_actions, self.hidden):
            raise ValueError("parameter count does not match the architecture")
        if not np.all(np.isfinite(params)):
            raise ValueError("policy parameters must be finite")

    def replace(self, params: np.ndarray) -> "PolicyParams":
        return PolicyParams(self.arch, params, self.n_features, self.n_actions, self.hidden)

    @property
    def bits(self) -> int:
        return description_length(self)

    def unpack(self, params: np.ndarray | None = None) -> dict[str, np.ndarray]:
        flat = self.params if params is None else params
        d, k, h = self.n_features, self.n_actions, self.hidden
        if self.arch == "tabular":
            return {"W": flat.reshape(d, k)}
        if self.arch == "linear":
            return {"W": flat[: d * k].reshape(d, k), "b": flat[d * k:]}
        i = 0
        out = {}
        for name, shape in (("W1", (d, h)), ("b1", (h,)), ("W2", (h, k)), ("b2", (k,))):
            size = int(np.prod(shape))
            out[name] = flat[i:i + size].reshape(shape)
            i += size
        return out


def param_count(arch: str, n_features: int, n_actions: int, hidden: int = 0) -> int:
    d, k, h = n_features, n_actions, hidden
    if arch == "tabular":
        return d * k
    if arch == "linear":
        return d * k + k
    if arch == "mlp":
        if h < 1:
            raise ValueError("mlp policies need a positive hidden width")
        return d * h + h + h * k + k
    raise ValueError(f"unknown architecture {arch!r}")


def init_policy(arch: str, n_features: int, n_actions: int, rng: np.random.Generator,
                hidden: int = 16) -> PolicyParams:
    h = hidden if arch == "mlp" else 0
    n = param_count(arch, n_features, n_actions, h)
    return PolicyParams(arch, rng.uniform(-INIT_SCALE, INIT_SCALE, n), n_features, n_actions, h)


def zero_policy(arch: str, n_features: int, n_actions: int, hidden: int = 16) -> PolicyParams:
    h = hidden if arch == "mlp" else 0
    return PolicyParams(arch, np.zeros(param_count(arch, n_features, n_actions, h)),
                        n_features, n_actions, h)


def description_length(policy: PolicyParams) -> int:
    return BITS_PER_PARAM * policy.params.size


def _as_rows(policy: PolicyParams, features) -> tuple[np.ndarray, bool]:
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        if X.size != policy.n_features:
            raise ValueError(f"expected {policy.n_features} features, got {X.size}")
        return X[None, :], False
    if X.ndim == 2:
        if X.shape[1] != policy.n_features:
            raise ValueError(f"expected {policy.n_features} features per row, got {X.shape[1]}")
        if policy.n_actions != 1:
            raise ValueError("row-per-action features need a single-output scorer")
        if X.shape[0] == 0:
            raise ValueError("no candidate actions")
        return X, True
    raise ValueError("features must be a vector or a matrix")


def _forward(policy: PolicyParams, X: np.ndarray, params=None):
    p = policy.unpack(params)
    if policy.arch == "tabular":
        return X @ p["W"], None
    if policy.arch == "linear":
        return X @ p["W"] + p["b"], None
    H = np.tanh(X @ p["W1"] + p["b1"])
    return H @ p["W2"] + p["b2"], H


def logits(policy: PolicyParams, features, params=None) -> np.ndarray:
    X, per_row = _as_rows(policy, features)
    out, _ = _forward(policy, X, params)
    return out[:, 0] if per_row else out[0]


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def action_distribution(policy: PolicyParams, features) -> np.ndarray:
    return softmax(logits(policy, features))


def greedy_action(policy: PolicyParams, features) -> int:
    """Deterministic extraction: argmax, lowest index on ties."""
    return int(np.argmax(action_distribution(policy, features)))


def _backward(policy: PolicyParams, X: np.ndarray, H, G: np.ndarray) -> np.ndarray:
    """Parameter gradient of sum(G * outputs) for outputs of shape (m, k)."""
    if policy.arch == "tabular":
        return (X.T @ G).reshape(-1)
    if policy.arch == "linear":
        return np.concatenate([(X.T @ G).reshape(-1), G.sum(axis=0)])
    p = policy.unpack()
    dZ = (G @ p["W2"].T) * (1.0 - H * H)
    return np.concatenate([(X.T @ dZ).reshape(-1), dZ.sum(axis=0),
                           (H.T @ G).reshape(-1), G.sum(axis=0)])


def logit_gradient(policy: PolicyParams, features, weights: np.ndarray) -> np.ndarray:
    """Gradient of ``weights @ logits`` with respect to the parameter vector."""
    X, per_row = _as_rows(policy, features)
    _, H = _forward(policy, X)
    w = np.asarray(weights, dtype=float)
    G = w[:, None] if per_row else w[None, :]
    return _backward(policy, X, H, G)


def log_prob_gradient(policy: PolicyParams, features, action: int) -> np.ndarray:
    pi = action_distribution(policy, features)
    if not 0 <= action < pi.size:
        raise ValueError(f"action {action} out of range for {pi.size} actions")
    score = -pi
    score[action] += 1.0
    return logit_gradient(policy, features, score)


def divergence(p, q, kind: str = "KL") -> float:
    """KL(p||q) or JS(p||q) in nats."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must have the same support")
    if kind == "KL":
        return _kl(p, q)
    if kind == "JS":
        m = 0.5 * (p + q)
        return 0.5 * _kl(p, m) + 0.5 * _kl(q, m)
    raise ValueError("kind must be 'KL' or 'JS'")


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0.0
    if np.any(q[mask] <= 0.0):
        return float("inf")
    return float(max(0.0, np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask])))))


def sample_trajectory(policy: PolicyParams, env, seed=None, greedy: bool = False,
                      rng: np.random.Generator | None = None) -> Trajectory:
    """Roll ``policy`` out on ``env`` until a terminal state or the horizon cap.

    Environments provide ``spec``, ``reset(rng)``, ``token(state)``,
    ``observe(state)``, ``step(state, action, rng)``, ``is_terminal(state)``
    and optionally ``info(state)``.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    spec: MDPSpec = env.spec
    state = env.reset(rng)
    steps: list[Step] = []
    while not env.is_terminal(state) and len(steps) < spec.horizon_cap:
        obs: Observation = env.observe(state)
        if greedy:
            idx = greedy_action(policy, obs.features)
        else:
            pi = action_distribution(policy, obs.features)
            idx = int(rng.choice(pi.size, p=pi))
        token = env.token(state)
        action = obs.actions[idx]
        state, reward, _ = env.step(state, action, rng)
        steps.append(Step(token, action, float(reward), obs))
    complete = env.is_terminal(state) or (
        spec.time_limit_terminal and len(steps) >= spec.horizon_cap)
    info = env.info(state) if hasattr(env, "info") else {}
    return Trajectory(spec.view_id, tuple(steps), env.token(state), complete, info)


def save_checkpoint(policy: PolicyParams, path) -> None:
    lines = [f"arch {policy.arch}", f"n_features {policy.n_features}",
             f"n_actions {policy.n_actions}", f"hidden {policy.hidden}", "params"]
    lines += [repr(float(v)) for v in policy.params]
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> PolicyParams:
    lines = Path(path).read_text().splitlines()
    header = {}
    i = 0
    while lines[i] != "params":
        key, value = lines[i].split(" ", 1)
        header[key] = value
        i += 1
    params = np.array([float(v) for v in lines[i + 1:] if v.strip()])
    return PolicyParams(header["arch"], params, int(header["n_features"]),
                        int(header["n_actions"]), int(header["hidden"]))
