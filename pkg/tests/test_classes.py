import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import deterministic_members, indexed_error_bruteforce
from resetirl.classes import (BudgetExceeded, PolicyClass, ResetDistribution, RewardClass,
                              behavioral_cloning, best_realizable_policy, coverage_coefficient,
                              optimal_class_value, reward_agnostic_completeness,
                              reward_indexed_completeness, worst_case_gap)
from resetirl.demos import DemoDataset, make_rng, sample_demos
from resetirl.instances import optimal_policy, optimal_value, random_mask, random_mdp, random_policy
from resetirl.mdp import (ConfigurationError, NonstationaryPolicy, TabularMdp, compute_occupancy,
                          policy_value)


def random_reset(rng, H, S):
    rho = rng.random((H, S)) + 0.01
    return ResetDistribution(rho / rho.sum(axis=1, keepdims=True))


def small_instance(seed, S=4, A=3, H=3, K=2):
    rng = make_rng(seed)
    mdp = random_mdp(rng, S, A, H)
    mask = random_mask(rng, S, A)
    rewards = RewardClass(rng.random((K, S, A)))
    return mdp, PolicyClass.masked(mask), rewards, random_reset(rng, H, S)


def bandit_one_step():
    """H=1, one state; only action 0 is allowed but action 1 pays 1."""
    mdp = TabularMdp(np.ones((1, 1, 2, 1)), [[0.0, 1.0]], [1.0])
    return mdp, PolicyClass.masked([[True, False]]), ResetDistribution(np.ones((1, 1)))


def test_full_class_has_zero_error():
    mdp, _, rewards, rho = small_instance(0)
    full = PolicyClass.full(4, 3)
    rep = reward_agnostic_completeness(mdp, full, rewards, rho)
    assert rep.exact and rep.epsilon_pi == 0.0


def test_one_step_hand_example():
    mdp, cls, rho = bandit_one_step()
    pol = NonstationaryPolicy.from_actions([[0]], 2)
    assert reward_indexed_completeness(mdp, cls, pol, mdp.reward, rho) == pytest.approx(1.0)
    rep = reward_agnostic_completeness(mdp, cls, RewardClass([mdp.reward]), rho)
    assert rep.epsilon_pi == pytest.approx(1.0) and rep.exact


@pytest.mark.parametrize("seed", range(6))
def test_exact_search_matches_brute_force(seed):
    mdp, cls, rewards, rho = small_instance(seed)
    brute = max(indexed_error_bruteforce(mdp, cls.allowed, r, rho.per_step, acts)
                for acts in deterministic_members(cls.allowed, mdp.horizon)
                for r in rewards.base)
    rep = reward_agnostic_completeness(mdp, cls, rewards, rho)
    assert rep.exact
    assert rep.epsilon_pi == pytest.approx(brute, abs=1e-12)
    # the reported worst member actually attains the value
    k = rep.worst_pair[1]
    attained = reward_indexed_completeness(mdp, cls, rep.worst_policy, rewards.base[k], rho)
    assert attained == pytest.approx(rep.epsilon_pi, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_indexed_error_matches_bruteforce_per_member(seed):
    mdp, cls, rewards, rho = small_instance(seed, S=3, A=2, H=3)
    for acts in list(deterministic_members(cls.allowed, 3))[:20]:
        pol = NonstationaryPolicy.from_actions(acts, 2)
        got = reward_indexed_completeness(mdp, cls, pol, rewards.base[0], rho)
        want = indexed_error_bruteforce(mdp, cls.allowed, rewards.base[0], rho.per_step, acts)
        assert got == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_fallback_bounds_bracket_exact_value(seed):
    mdp, cls, rewards, rho = small_instance(seed)
    exact = reward_agnostic_completeness(mdp, cls, rewards, rho)
    approx = reward_agnostic_completeness(mdp, cls, rewards, rho, enumeration_budget=1)
    assert not approx.exact and approx.lower_bound_only
    assert approx.epsilon_pi <= exact.epsilon_pi + 1e-12
    assert approx.upper_bound >= exact.epsilon_pi - 1e-12


def test_budget_exceeded_without_fallback():
    mdp, cls, rewards, rho = small_instance(1)
    with pytest.raises(BudgetExceeded):
        reward_agnostic_completeness(mdp, cls, rewards, rho, enumeration_budget=1,
                                     allow_lower_bound=False)


def test_explicit_class_hand_value():
    mdp, _, rho = bandit_one_step()
    only = NonstationaryPolicy.from_actions([[0]], 2)
    cls = PolicyClass.explicit([only])
    rep = reward_agnostic_completeness(mdp, cls, RewardClass([mdp.reward]), rho)
    assert rep.per_pair_errors.shape == (1, 1)
    assert rep.epsilon_pi == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_error_bounded_by_horizon(seed):
    mdp, cls, rewards, rho = small_instance(seed, S=3, A=2, H=3)
    rep = reward_agnostic_completeness(mdp, cls, rewards, rho)
    assert 0.0 <= rep.epsilon_pi <= mdp.horizon


def test_best_realizable_is_expert_when_realizable():
    rng = make_rng(3)
    mdp = random_mdp(rng, 3, 2, 3)
    expert = optimal_policy(mdp)
    rewards = RewardClass([mdp.reward, rng.random((3, 2))])
    pistar = best_realizable_policy(mdp, PolicyClass.full(3, 2), rewards, expert)
    assert worst_case_gap(mdp, pistar, rewards, expert)[0] <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_best_realizable_matches_enumeration_and_lp(seed):
    mdp, cls, rewards, _ = small_instance(seed, S=3, A=3, H=3)
    expert = optimal_policy(mdp)
    brute = min(worst_case_gap(mdp, NonstationaryPolicy.from_actions(a, 3), rewards, expert)[0]
                for a in deterministic_members(cls.allowed, 3))
    enum = best_realizable_policy(mdp, cls, rewards, expert, method="enumerate")
    assert worst_case_gap(mdp, enum, rewards, expert)[0] == pytest.approx(brute, abs=1e-12)
    lp = best_realizable_policy(mdp, cls, rewards, expert, method="lp")
    assert cls.contains(lp, atol=1e-9)
    # stochastic members can only do better than the best deterministic one
    assert worst_case_gap(mdp, lp, rewards, expert)[0] <= brute + 1e-7


def test_best_realizable_budget():
    mdp, cls, rewards, _ = small_instance(2)
    with pytest.raises(BudgetExceeded):
        best_realizable_policy(mdp, cls, rewards, optimal_policy(mdp), enumeration_budget=2,
                               method="enumerate")


def test_coverage_coefficient_cases():
    rng = make_rng(4)
    mdp = random_mdp(rng, 3, 2, 2)
    pol = random_policy(rng, 2, 3, 2)
    occ = compute_occupancy(mdp, pol)
    assert coverage_coefficient(occ, occ) == pytest.approx(1.0)
    # a deterministic chain that never reaches state 1 cannot cover one that does
    kernel = np.zeros((2, 2, 2))
    kernel[:, 0, 0] = 1.0
    kernel[:, 1, 1] = 1.0
    chain = TabularMdp.time_homogeneous(kernel, np.zeros((2, 2)), [1.0, 0.0], 2)
    stay = compute_occupancy(chain, NonstationaryPolicy.from_actions(np.zeros((2, 2), int), 2))
    go = compute_occupancy(chain, NonstationaryPolicy.from_actions(np.ones((2, 2), int), 2))
    assert math.isinf(coverage_coefficient(go, stay))
    mixed = compute_occupancy(chain, NonstationaryPolicy.uniform(2, 2, 2))
    # averaged: go puts 1/2 on (s0,a1) and (s1,a1); uniform puts 3/8 on each s0
    # pair and 1/8 on each s1 pair, so the worst ratio is (1/2)/(1/8)
    assert coverage_coefficient(go, mixed) == pytest.approx(4.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_coverage_at_least_one(seed):
    rng = make_rng(seed)
    mdp = random_mdp(rng, 3, 2, 3)
    a = compute_occupancy(mdp, random_policy(rng, 3, 3, 2))
    b = compute_occupancy(mdp, random_policy(rng, 3, 3, 2))
    assert coverage_coefficient(a, b) >= 1.0 - 1e-12


def demos_from_records(records, S=2, A=3, H=1):
    rec = np.asarray(records)
    return DemoDataset(S, A, H, rec[:, 0], rec[:, 1], rec[:, 2], np.arange(len(rec)))


def test_bc_recovers_realizable_expert():
    rng = make_rng(5)
    mdp = random_mdp(rng, 3, 2, 3)
    expert = optimal_policy(mdp)
    demos = sample_demos(mdp, expert, 600, seed=1)
    bc = behavioral_cloning(demos, PolicyClass.full(3, 2))
    visited = demos.state_counts() > 0
    assert np.array_equal(bc.probs[visited], expert.probs[visited])


def test_bc_majority_and_unvisited_fallback():
    records = [(0, 0, 1)] * 7 + [(0, 0, 2)] * 3
    bc = behavioral_cloning(demos_from_records(records), PolicyClass.full(2, 3))
    assert bc.probs[0, 0].tolist() == [0.0, 1.0, 0.0]
    assert np.allclose(bc.probs[0, 1], 1 / 3)


def test_bc_respects_mask():
    records = [(0, 0, 1)] * 7 + [(0, 0, 2)] * 3
    mask = [[True, False, True], [True, True, False]]
    bc = behavioral_cloning(demos_from_records(records), PolicyClass.masked(mask))
    assert bc.probs[0, 0].tolist() == [0.0, 0.0, 1.0]
    assert np.allclose(bc.probs[0, 1], [0.5, 0.5, 0.0])


def test_bc_empty_dataset_raises():
    with pytest.raises(ConfigurationError):
        behavioral_cloning(demos_from_records(np.zeros((0, 3), int)), PolicyClass.full(2, 3))


def test_member_index_round_trip():
    rng = make_rng(6)
    cls = PolicyClass.masked(random_mask(rng, 4, 3))
    total = cls.num_deterministic(2)
    for idx in (0, 1, total // 2, total - 1):
        member = cls.deterministic_member(idx, 2)
        assert cls.contains(member)
        assert cls.member_index(member.actions()) == idx
    with pytest.raises(IndexError):
        cls.deterministic_member(total, 2)
    assert cls.log_size(2) == pytest.approx(math.log(total))


def test_optimal_class_value_matches_masked_backward_induction():
    mdp, cls, rewards, _ = small_instance(7)
    for r in rewards.base:
        brute = max(policy_value(mdp, NonstationaryPolicy.from_actions(a, 3), r)
                    for a in deterministic_members(cls.allowed, 3))
        assert optimal_class_value(mdp, cls, r) == pytest.approx(brute, abs=1e-12)
        assert optimal_value(mdp, r, cls.allowed) == pytest.approx(brute, abs=1e-12)


def test_json_round_trips():
    mdp, cls, rewards, rho = small_instance(8)
    assert np.array_equal(PolicyClass.from_dict(json.loads(json.dumps(cls.to_dict()))).allowed,
                          cls.allowed)
    explicit = PolicyClass.explicit([random_policy(make_rng(1), 3, 4, 3) for _ in range(2)])
    back = PolicyClass.from_dict(json.loads(json.dumps(explicit.to_dict())))
    assert all(np.array_equal(a.probs, b.probs) for a, b in zip(back.members, explicit.members))
    r2 = RewardClass.from_dict(json.loads(json.dumps(rewards.to_dict())))
    assert np.array_equal(r2.base, rewards.base) and r2.names == rewards.names
    rep = reward_agnostic_completeness(mdp, cls, rewards, rho)
    doc = json.loads(json.dumps(rep.to_dict()))
    assert doc["epsilon_pi"] == rep.epsilon_pi and doc["exact"] is True


def test_reward_class_effective_clips_and_indexes():
    rewards = RewardClass([np.full((1, 2), 0.2), np.full((1, 2), 1.0)], names=("low", "high"))
    assert np.allclose(rewards.effective([0.5, 0.5]), 0.6)
    assert rewards.index_of(np.full((1, 2), 1.0)) == 1
    assert rewards.index_of(np.full((1, 2), 0.5)) is None
    with pytest.raises(ConfigurationError):
        RewardClass([np.full((1, 2), 1.5)])


def test_invalid_reset_shape():
    mdp, cls, rewards, _ = small_instance(9)
    with pytest.raises(ConfigurationError):
        reward_agnostic_completeness(mdp, cls, rewards, ResetDistribution(np.ones((2, 4)) / 4))
