"""Central finite-difference oracles for policy gradients."""

import numpy as np

from copier.learners import behavior_cloning_loss
from copier.policies import action_distribution, init_policy, log_prob_gradient

ARCH_SHAPES = {"tabular": {}, "linear": {}, "mlp": {"hidden": 5}}


def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_error(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)
    return float(np.linalg.norm(a - b) / scale)


def random_case(arch, rng, shared_scorer=False):
    d = int(rng.integers(2, 6))
    k = 1 if shared_scorer else int(rng.integers(2, 5))
    policy = init_policy(arch, d, k, rng, hidden=5)
    policy = policy.replace(rng.normal(0, 1.0, policy.params.size))
    rows = int(rng.integers(2, 5)) if shared_scorer else None
    feats = rng.normal(size=(rows, d) if shared_scorer else d)
    n_actions = rows if shared_scorer else k
    return policy, feats, int(rng.integers(n_actions))


def score_error(policy, feats, action):
    def f(theta):
        return np.log(action_distribution(policy.replace(theta), feats)[action])
    return rel_error(log_prob_gradient(policy, feats, action), numeric_grad(f, policy.params))


def bc_error(policy, demos):
    def f(theta):
        return behavior_cloning_loss(policy.replace(theta), demos)[0]
    return rel_error(behavior_cloning_loss(policy, demos)[1], numeric_grad(f, policy.params))
