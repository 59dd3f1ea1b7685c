import sys

import numpy as np
import pytest

from copier.core import MDPSpec, Observation, Step, Trajectory, TwoViewInstance, ViewMapping


def make_traj(view, rewards, states=None, actions=None, complete=True, final="end"):
    states = states if states is not None else list(range(len(rewards)))
    actions = actions if actions is not None else [0] * len(rewards)
    steps = tuple(Step(s, a, float(r)) for s, a, r in zip(states, actions, rewards))
    return Trajectory(view, steps, final, complete)


class BanditEnv:
    """One-step problem: k arms, fixed rewards, features given per view."""

    def __init__(self, view, rewards, features):
        self.rewards = list(rewards)
        self.features = np.asarray(features, dtype=float)
        self.spec = MDPSpec(view, 1.0, 1)

    def reset(self, rng=None):
        return "start"

    def token(self, state):
        return state

    def observe(self, state):
        return Observation(self.features, tuple(range(len(self.rewards))))

    def step(self, state, action, rng=None):
        return "done", self.rewards[action], True

    def is_terminal(self, state):
        return state == "done"


def _relabel(env, view):
    def fn(t):
        steps = tuple(Step(s.state, s.action, s.reward, env.observe(s.state)) for s in t.steps)
        return Trajectory(view, steps, t.final_state, t.complete)
    return fn


def bandit_instance(rewards_A, rewards_B=None, features_A=(1.0,), features_B=(1.0,)):
    """Two views of one bandit; the mapping swaps features and keeps actions and rewards."""
    rewards_B = rewards_A if rewards_B is None else rewards_B
    env_A = BanditEnv("A", rewards_A, features_A)
    env_B = BanditEnv("B", rewards_B, features_B)
    return TwoViewInstance("bandit", env_A, env_B,
                           ViewMapping("A", "B", _relabel(env_B, "B")),
                           ViewMapping("B", "A", _relabel(env_A, "A")), shared_actions=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
