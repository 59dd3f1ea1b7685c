import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from copier.core import Observation, Step, Trajectory
from copier.learners import (IL_ONLY, RL_WITH_IL, BaselineModel, UpdateConfig,
                             behavior_cloning_loss, copier_update, fit_linear_baseline,
                             kl_surrogate_loss, policy_gradient, pretrain_bc, returns_to_go)
from copier.policies import (ARCHS, PolicyParams, action_distribution, init_policy,
                             log_prob_gradient, sample_trajectory, zero_policy)
from conftest import BanditEnv
from gradcheck import bc_error, numeric_grad, random_case, rel_error


def feat_traj(features, actions, rewards, k=2):
    steps = tuple(Step(i, a, float(r), Observation(np.asarray(f, float), tuple(range(k))))
                  for i, (f, a, r) in enumerate(zip(features, actions, rewards)))
    return Trajectory("A", steps, "end")


def test_update_config_validation():
    with pytest.raises(ValueError):
        UpdateConfig(learning_rate=0)
    with pytest.raises(ValueError):
        UpdateConfig(lam=-1)
    with pytest.raises(ValueError):
        UpdateConfig(mode="RL")
    with pytest.raises(ValueError):
        UpdateConfig(surrogate="mse")


def test_returns_to_go():
    assert np.allclose(returns_to_go([1, 1, 1], 0.5), [1.75, 1.5, 1.0])


def test_baseline_constant_returns():
    trajs = [feat_traj([[1.0, 1.0]], [0], [3.0]) for _ in range(4)]
    b = fit_linear_baseline(trajs, 1.0)
    assert b.predict([1.0, 1.0]) == pytest.approx(3.0, abs=1e-5)


def test_baseline_single_state():
    b = fit_linear_baseline([feat_traj([[0.3, -0.2]], [1], [5.0])], 1.0)
    assert b.predict([0.3, -0.2]) == pytest.approx(5.0, abs=1e-6)


def test_baseline_beats_zero(rng):
    trajs = [feat_traj(rng.normal(size=(5, 3)), [0] * 5, rng.normal(size=5)) for _ in range(6)]
    b = fit_linear_baseline(trajs, 0.9)
    res_fit = res_zero = 0.0
    for t in trajs:
        for s, g in zip(t.steps, returns_to_go(t.rewards, 0.9)):
            res_fit += (g - b.predict(s.obs.features)) ** 2
            res_zero += g ** 2
    assert res_fit <= res_zero
    with pytest.raises(ValueError):
        fit_linear_baseline([], 1.0)


def test_pg_zero_with_exact_baseline():
    p = init_policy("linear", 2, 2, np.random.default_rng(0))
    t = feat_traj([[1.0, 0.0]], [0], [4.0])
    exact = BaselineModel(np.array([0.0, 0.0, 4.0]))
    assert np.allclose(policy_gradient(p, [t], exact, 1.0), 0.0)


def test_pg_bandit_sign():
    env = BanditEnv("A", [1.0, 0.0], [1.0])
    p = zero_policy("tabular", 1, 2)
    trajs = [sample_trajectory(p, env, seed=s) for s in range(200)]
    g = policy_gradient(p, trajs, None, 1.0)
    assert g[0] > 0 and g[1] < 0


def test_pg_matches_hand_sum(rng):
    p = init_policy("linear", 3, 2, rng)
    trajs = [feat_traj(rng.normal(size=(3, 3)), [0, 1, 1], [1.0, -2.0, 0.5]),
             feat_traj(rng.normal(size=(2, 3)), [1, 0], [0.0, 3.0])]
    b = BaselineModel(rng.normal(size=4))
    gamma = 0.9
    expected = np.zeros(p.params.size)
    for t in trajs:
        r = t.rewards
        for i, s in enumerate(t.steps):
            G = sum(gamma ** (j - i) * r[j] for j in range(i, len(r)))
            adv = G - b.predict(s.obs.features)
            expected += gamma ** i * adv * log_prob_gradient(p, s.obs.features, s.action)
    assert np.allclose(policy_gradient(p, trajs, b, gamma), expected / 2, atol=1e-12)


def test_bc_examples(rng):
    p = zero_policy("linear", 3, 2)
    demos = [(rng.normal(size=3), int(rng.integers(2))) for _ in range(5)]
    assert behavior_cloning_loss(p, demos)[0] == pytest.approx(math.log(2))
    sharp = PolicyParams("tabular", [60.0, -60.0], 1, 2)
    assert behavior_cloning_loss(sharp, [([1.0], 0)] * 3)[0] < 1e-12
    loss, grad = behavior_cloning_loss(p, [])
    assert loss == 0.0 and not grad.any()


def test_bc_matches_per_example_average(rng):
    p = init_policy("mlp", 3, 3, rng, hidden=4)
    demos = [(rng.normal(size=3), int(rng.integers(3))) for _ in range(7)]
    expected = np.mean([-math.log(action_distribution(p, f)[a]) for f, a in demos])
    assert behavior_cloning_loss(p, demos)[0] == pytest.approx(expected, abs=1e-12)
    with pytest.raises(ValueError):
        behavior_cloning_loss(p, [(np.zeros(3), 3)])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), arch=st.sampled_from(ARCHS))
def test_bc_nonnegative(seed, arch):
    rng = np.random.default_rng(seed)
    p, _, _ = random_case(arch, rng)
    demos = [(rng.normal(size=p.n_features), int(rng.integers(p.n_actions))) for _ in range(4)]
    assert behavior_cloning_loss(p, demos)[0] >= 0


@pytest.mark.parametrize("arch", ARCHS)
def test_bc_gradient_finite_differences(arch):
    rng = np.random.default_rng(11)
    for _ in range(30):
        p, _, _ = random_case(arch, rng)
        demos = [(rng.normal(size=p.n_features), int(rng.integers(p.n_actions)))
                 for _ in range(3)]
        assert bc_error(p, demos) <= 1e-4


def test_kl_surrogate_gradient(rng):
    p = init_policy("linear", 3, 3, rng)
    p = p.replace(rng.normal(size=p.params.size))
    demos = [(rng.normal(size=3), rng.dirichlet(np.ones(3))) for _ in range(4)]

    def f(theta):
        return kl_surrogate_loss(p.replace(theta), demos)[0]
    assert rel_error(kl_surrogate_loss(p, demos)[1], numeric_grad(f, p.params)) <= 1e-5
    q = action_distribution(p, demos[0][0])
    assert kl_surrogate_loss(p, [(demos[0][0], q)])[0] == pytest.approx(0.0, abs=1e-12)


def _batch(rng):
    p = init_policy("linear", 3, 2, rng)
    trajs = [feat_traj(rng.normal(size=(3, 3)), [0, 1, 0], rng.normal(size=3))]
    demos = [(rng.normal(size=3), 1), (rng.normal(size=3), 0)]
    return p, trajs, demos


def test_update_lambda_zero_is_pg_step(rng):
    p, trajs, demos = _batch(rng)
    cfg = UpdateConfig(RL_WITH_IL, lam=0.0, learning_rate=0.1)
    b = fit_linear_baseline(trajs, 1.0)
    out = copier_update(p, trajs, demos, cfg)
    assert np.array_equal(out.params, p.params + 0.1 * policy_gradient(p, trajs, b, 1.0))


def test_update_il_only_ignores_rewards(rng):
    p, trajs, demos = _batch(rng)
    cfg = UpdateConfig(IL_ONLY, lam=1.0, learning_rate=0.1)
    other = [feat_traj([s.obs.features for s in trajs[0].steps], [0, 1, 0], [9.0, 9.0, 9.0])]
    a = copier_update(p, trajs, demos, cfg)
    assert np.array_equal(a.params, copier_update(p, other, demos, cfg).params)
    assert np.array_equal(a.params, p.params - 0.1 * behavior_cloning_loss(p, demos)[1])


def test_update_combined_delta(rng):
    p, trajs, demos = _batch(rng)
    cfg = UpdateConfig(RL_WITH_IL, lam=1.0, learning_rate=0.05)
    b = fit_linear_baseline(trajs, 1.0)
    grad_pg_loss = -policy_gradient(p, trajs, b, 1.0)
    grad_bc = behavior_cloning_loss(p, demos)[1]
    out = copier_update(p, trajs, demos, cfg)
    assert np.allclose(out.params - p.params, -0.05 * (grad_pg_loss + grad_bc), atol=1e-15)
    with pytest.raises(ValueError):
        copier_update(p, [], demos, cfg)


def test_pretrain_fits_demos(rng):
    p = init_policy("linear", 2, 2, rng)
    demos = [(np.array([1.0, 0.0]), 0), (np.array([0.0, 1.0]), 1)]
    q = pretrain_bc(p, demos, 0.5, 200)
    assert behavior_cloning_loss(q, demos)[0] < behavior_cloning_loss(p, demos)[0] / 5
