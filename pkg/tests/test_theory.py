import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from copier.grid import GridConfig, make_two_view_grid, value_iteration
from copier.policies import PolicyParams, init_policy, sample_trajectory, zero_policy
from copier.theory import (DisagreementStats, GapBoundParams, InstanceRollouts,
                           disagreement_counts, disagreement_from_visits, improvement_diagnostics,
                           measure_policy_error, pac_disagreement_bound, performance_gap_bound,
                           policy_error_from_visits)
from conftest import bandit_instance

FLIP = PolicyParams("tabular", [0.0, 1.0], 1, 2)    # always action 1
STAY = PolicyParams("tabular", [1.0, 0.0], 1, 2)    # always action 0


def bandit_rollouts(inst, pA, pB, m=3, seed=0):
    return InstanceRollouts(inst, [sample_trajectory(pA, inst.env_A, seed=[seed, 0, j])
                                   for j in range(m)],
                            [sample_trajectory(pB, inst.env_B, seed=[seed, 1, j])
                             for j in range(m)])


# ------------------------------------------------------------------- diagnostics

def test_identical_policies_zero_beta_and_delta():
    cfg = GridConfig(4, 4, mask_A=tuple(range(13)), mask_B=tuple(range(13)), noise=0.2)
    inst = make_two_view_grid(cfg)
    p = init_policy("linear", 13, 4, np.random.default_rng(0))
    trajs = [sample_trajectory(p, inst.env_A, seed=s) for s in range(3)]
    mirrored = [sample_trajectory(p, inst.env_B, seed=s) for s in range(3)]
    d = improvement_diagnostics([InstanceRollouts(inst, trajs, mirrored)], (p, p), (p, p))
    assert d.beta_hat_D1 == 0.0 and d.beta_hat_D2 == 0.0
    assert d.delta_hat_1 == 0.0 and d.delta_hat_2 == 0.0
    assert d.alpha_hat_A == 0.0 and not d.applicable


def test_a_better_everywhere():
    insts = [bandit_instance([0.0, -1.0]), bandit_instance([0.0, -2.0])]
    batches = [bandit_rollouts(i, STAY, FLIP) for i in insts]
    d = improvement_diagnostics(batches, (STAY, FLIP), (STAY, FLIP))
    assert d.delta_hat_2 == 0.0 and d.n_D2 == 0 and d.n_D1 == 2


def test_delta_hat_mean_of_gaps():
    insts = [bandit_instance([0.0, -2.0]), bandit_instance([0.0, -3.0])]
    batches = [bandit_rollouts(i, STAY, FLIP) for i in insts]
    d = improvement_diagnostics(batches, (STAY, FLIP), (STAY, FLIP))
    assert d.delta_hat_1 == pytest.approx(2.5)


def test_ties_go_to_first_part():
    inst = bandit_instance([-1.0, -1.0])
    d = improvement_diagnostics([bandit_rollouts(inst, STAY, FLIP)], (STAY, FLIP), (STAY, FLIP))
    assert d.n_D1 == 1 and d.delta_hat_1 == 0.0


def test_diagnostics_nonnegative_and_applicability():
    inst = bandit_instance([1.0, 0.5])
    rng = np.random.default_rng(3)
    pA, pB = (PolicyParams("tabular", rng.normal(size=2), 1, 2) for _ in range(2))
    qA, qB = (PolicyParams("tabular", rng.normal(size=2), 1, 2) for _ in range(2))
    d = improvement_diagnostics([bandit_rollouts(inst, pA, pB, m=6)], (pA, pB), (qA, qB),
                                gammas=(0.9, 0.9))
    vals = [d.alpha_hat_A, d.alpha_hat_B, d.beta_hat_D1, d.beta_hat_D2, d.delta_hat_1,
            d.delta_hat_2, d.eps_hat_A_D, d.eps_hat_B_D]
    assert all(v >= 0 for v in vals) and d.applicable and d.alpha_hat_A > 0
    assert math.isfinite(d.penalty_A)
    with pytest.raises(ValueError):
        improvement_diagnostics([InstanceRollouts(inst, [], [])], (pA, pB), (qA, qB))
    with pytest.raises(ValueError):
        improvement_diagnostics([], (pA, pB), (qA, qB))


# ---------------------------------------------------------------- disagreement

def test_counts_identical_and_flipped():
    inst = bandit_instance([0.0, 0.0])
    trajs = [sample_trajectory(STAY, inst.env_A, seed=s) for s in range(5)]
    same = disagreement_counts(trajs, inst, STAY, STAY)
    assert np.array_equal(same.n_agree, same.n_A) and np.array_equal(same.n_A, same.n_B)
    flipped = disagreement_counts(trajs, inst, STAY, FLIP)
    assert flipped.n_agree.sum() == 0 and flipped.N == 5


def test_counts_hand_tally():
    cfg = GridConfig(4, 4)
    inst = make_two_view_grid(cfg)
    pA = init_policy("linear", len(cfg.mask_A), 4, np.random.default_rng(0))
    pB = init_policy("linear", len(cfg.mask_B), 4, np.random.default_rng(1))
    pA = pA.replace(np.random.default_rng(2).normal(0, 2, pA.params.size))
    pB = pB.replace(np.random.default_rng(3).normal(0, 2, pB.params.size))
    trajs = [sample_trajectory(pA, inst.env_A, seed=0)]
    assert len(trajs[0]) <= 32
    stats = disagreement_counts(trajs, inst, pA, pB)
    tally = np.zeros((3, 4), int)
    from copier.policies import greedy_action
    for s in trajs[0].steps:
        a = greedy_action(pA, inst.env_A.observe(s.state).features)
        b = greedy_action(pB, inst.env_B.observe(s.state).features)
        tally[0, a] += 1
        tally[1, b] += 1
        tally[2, a] += a == b
    assert np.array_equal(stats.n_A, tally[0]) and np.array_equal(stats.n_B, tally[1])
    assert np.array_equal(stats.n_agree, tally[2])


def test_stats_validation():
    with pytest.raises(ValueError):
        DisagreementStats(2, [1, 1], [1, 1], [2, 0])
    with pytest.raises(ValueError):
        DisagreementStats(2, [1, 1], [1, 2], [0, 0])
    with pytest.raises(ValueError):
        DisagreementStats(2, [-1, 1], [0, 0], [0, 0])


# -------------------------------------------------------------------- the bound

def test_perfect_agreement_closed_form():
    stats = DisagreementStats(2, [500, 300], [500, 300], [500, 300])
    r = pac_disagreement_bound(stats, 10, 12, 0.1)
    assert np.allclose(r.b, r.eps / (1 - 2 * r.eps))


def test_derived_numeric_triple():
    stats = DisagreementStats(2, [20000, 20000], [20000, 20000], [20000, 20000])
    r = pac_disagreement_bound(stats, 32, 32, 0.05)
    eps = math.sqrt((math.log(2) * 64 + math.log(2 * 2 / 0.05)) / (2 * 20000))
    assert r.eps[0] == pytest.approx(eps, abs=1e-12)
    assert abs(r.eps[0] - 0.034908) <= 1e-6
    assert abs(r.zeta[0] - 0.930184) <= 1e-6
    assert abs(r.b[0] - 0.037528) <= 1e-6
    assert r.all_valid and r.max_b == pytest.approx(r.b[0])


def test_invalid_and_undefined_actions():
    stats = DisagreementStats(3, [100, 100, 0], [100, 100, 0], [100, 10, 0])
    r = pac_disagreement_bound(stats, 1, 1, 0.05)
    assert r.defined.tolist() == [True, True, False]
    assert r.valid.tolist() == [True, False, False]
    assert r.max_b == pytest.approx(r.b[0])
    vacuous = pac_disagreement_bound(DisagreementStats(2, [5, 5], [5, 5], [0, 0]), 1, 1, 0.05)
    assert vacuous.status == "vacuous" and not vacuous.all_valid
    with pytest.raises(ValueError):
        pac_disagreement_bound(stats, 1, 1, 1.0)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 10 ** 5), bits=st.integers(1, 500))
def test_eps_decreases_with_count(n, bits):
    def eps(count):
        s = DisagreementStats(2, [count, 0], [count, 0], [count, 0])
        return pac_disagreement_bound(s, bits, bits, 0.05).eps[0]
    assert eps(n + 1) < eps(n)


def test_gap_bound():
    assert performance_gap_bound(GapBoundParams(1.0, 10, 0.1)) == pytest.approx(1.0)
    assert performance_gap_bound(GapBoundParams(3.0, 7, 0.0)) == 0.0
    with pytest.raises(ValueError):
        GapBoundParams(-1, 1, 0.1)


def test_gap_bound_covers_observed_gap():
    cfg = GridConfig(4, 4)
    table = value_iteration(cfg)
    inst = make_two_view_grid(cfg)
    pol = init_policy("linear", len(cfg.mask_A), 4, np.random.default_rng(4))
    pol = pol.replace(np.random.default_rng(5).normal(0, 2, pol.params.size))
    t = sample_trajectory(pol, inst.env_A, seed=0, greedy=True)
    eps = measure_policy_error(pol, table.action, [t])
    from copier.grid import optimal_gap_u
    bound = performance_gap_bound(GapBoundParams(optimal_gap_u(table), cfg.horizon, eps))
    assert bound >= table.value(cfg.start) - t.total_reward


# ----------------------------------------------------------------- policy error

def test_policy_error_examples():
    inst = bandit_instance([0.0, 0.0])
    trajs = [sample_trajectory(STAY, inst.env_A, seed=s) for s in range(4)]
    assert measure_policy_error(STAY, lambda s: 0, trajs) == 0.0
    assert measure_policy_error(FLIP, lambda s: 0, trajs) == 1.0
    with pytest.raises(ValueError):
        measure_policy_error(STAY, lambda s: {}[s], trajs)


def test_policy_error_hand_count():
    cfg = GridConfig(4, 4)
    inst = make_two_view_grid(cfg)
    table = value_iteration(cfg)
    pol = zero_policy("linear", len(cfg.mask_A), 4)  # always "up" (index 0)
    t = sample_trajectory(pol, inst.env_A, seed=0, greedy=True)
    assert len(t) == cfg.horizon  # stuck against the top wall
    assert table.action((0, 0)) != 0  # "up" is never optimal, so every visit is an error
    assert measure_policy_error(pol, table.action, [t]) == 1.0


def test_visit_based_versions():
    counts = np.array([3, 1, 0, 2])
    a = np.array([0, 1, 1, 0])
    b = np.array([0, 0, 1, 0])
    s = disagreement_from_visits(counts, a, b, 2)
    assert s.n_A.tolist() == [5, 1] and s.n_B.tolist() == [6, 0] and s.n_agree.tolist() == [5, 0]
    assert policy_error_from_visits(counts, a, b) == pytest.approx(1 / 6)
