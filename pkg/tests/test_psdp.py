import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import deterministic_members
from resetirl.classes import PolicyClass, ResetDistribution, optimal_class_value
from resetirl.demos import make_rng
from resetirl.guitar import reset_from_occupancy
from resetirl.harness.scenarios import get_scenario
from resetirl.instances import optimal_policy, optimal_value, random_mask, random_mdp, random_policy
from resetirl.mdp import ConfigurationError, NonstationaryPolicy, TabularMdp, policy_value
from resetirl.psdp import PsdpConfig, psdp_certificate, psdp_solve


def full_reset(rng, H, S):
    rho = rng.random((H, S)) + 0.05
    return ResetDistribution(rho / rho.sum(axis=1, keepdims=True))


@pytest.mark.parametrize("seed", range(10))
def test_unmasked_full_support_is_optimal(seed):
    rng = make_rng(seed)
    mdp = random_mdp(rng, 4, 3, 4)
    cls = PolicyClass.full(4, 3)
    reset = full_reset(rng, 4, 4)
    policy = psdp_solve(mdp, cls, mdp.reward, PsdpConfig(reset=reset))
    assert policy_value(mdp, policy) == pytest.approx(optimal_value(mdp), abs=1e-10)
    assert np.all(psdp_certificate(mdp, cls, policy, mdp.reward, reset) <= 1e-10)


def test_horizon_one_forced_action():
    mdp = TabularMdp(np.ones((1, 1, 3, 1)), [[0.2, 0.9, 0.5]], [1.0])
    reset = ResetDistribution(np.ones((1, 1)))
    policy = psdp_solve(mdp, PolicyClass.full(1, 3), mdp.reward, PsdpConfig(reset=reset))
    assert policy.probs[0, 0].tolist() == [0.0, 1.0, 0.0]
    masked = PolicyClass.masked([[True, False, True]])
    policy = psdp_solve(mdp, masked, mdp.reward, PsdpConfig(reset=reset))
    assert policy.probs[0, 0].tolist() == [0.0, 0.0, 1.0]


def test_ties_go_to_lowest_action():
    mdp = TabularMdp(np.ones((1, 1, 3, 1)), [[0.5, 0.5, 0.5]], [1.0])
    reset = ResetDistribution(np.ones((1, 1)))
    policy = psdp_solve(mdp, PolicyClass.full(1, 3), mdp.reward, PsdpConfig(reset=reset))
    assert policy.actions().tolist() == [[0]]


def test_corrupted_policy_has_positive_certificate():
    rng = make_rng(20)
    mdp = random_mdp(rng, 3, 2, 3)
    cls = PolicyClass.full(3, 2)
    reset = full_reset(rng, 3, 3)
    policy = psdp_solve(mdp, cls, mdp.reward, PsdpConfig(reset=reset))
    probs = policy.probs.copy()
    probs[1] = 1.0 - probs[1]  # flip every step-1 action
    cert = psdp_certificate(mdp, cls, NonstationaryPolicy(probs), mdp.reward, reset)
    assert cert[1] > 1e-6
    assert np.all(cert[2:] <= 1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_adversarial_epsilon_certificate(seed):
    rng = make_rng(30 + seed)
    mdp = random_mdp(rng, 4, 3, 4)
    cls = PolicyClass.masked(random_mask(rng, 4, 3))
    reset = full_reset(rng, 4, 4)
    eps = 0.1
    policy = psdp_solve(mdp, cls, mdp.reward, PsdpConfig(epsilon=eps, reset=reset, adversarial=True))
    cert = psdp_certificate(mdp, cls, policy, mdp.reward, reset)
    assert np.all(cert <= eps + 1e-12)
    assert cls.contains(policy)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), off=st.sampled_from(["argmax", "base"]))
def test_reset_on_comparator_occupancy_dominates_it(seed, off):
    """With resets on a class member's own state distribution, PSDP never does worse."""
    rng = make_rng(seed)
    mdp = random_mdp(rng, 3, 3, 3)
    cls = PolicyClass.masked(random_mask(rng, 3, 3))
    comparator = optimal_policy(mdp, allowed=cls.allowed)
    reset = reset_from_occupancy(mdp, comparator)
    policy = psdp_solve(mdp, cls, mdp.reward, PsdpConfig(reset=reset, off_support=off))
    assert policy_value(mdp, policy) >= policy_value(mdp, comparator) - 1e-10
    assert np.all(psdp_certificate(mdp, cls, policy, mdp.reward, reset) <= 1e-10)


def test_block_maze_pistar_reset_reaches_class_optimum():
    scenario = get_scenario("block_maze")
    mdp, cls = scenario.mdp, scenario.policy_class
    reset = reset_from_occupancy(mdp, scenario.pistar())
    policy = psdp_solve(mdp, cls, mdp.reward, PsdpConfig(reset=reset))
    assert policy_value(mdp, policy) == pytest.approx(optimal_class_value(mdp, cls, mdp.reward),
                                                      abs=1e-10)


def test_masked_small_instance_matches_enumeration():
    rng = make_rng(41)
    mdp = random_mdp(rng, 3, 2, 3)
    cls = PolicyClass.masked(random_mask(rng, 3, 2))
    best = max(policy_value(mdp, NonstationaryPolicy.from_actions(a, 2))
               for a in deterministic_members(cls.allowed, 3))
    policy = psdp_solve(mdp, cls, mdp.reward, PsdpConfig(reset=full_reset(rng, 3, 3)))
    assert policy_value(mdp, policy) == pytest.approx(best, abs=1e-12)


def test_off_support_base_keeps_base_policy():
    rng = make_rng(50)
    mdp = random_mdp(rng, 3, 2, 2)
    cls = PolicyClass.full(3, 2)
    rho = np.array([[1.0, 0.0, 0.0], [0.5, 0.5, 0.0]])
    policy = psdp_solve(mdp, cls, mdp.reward,
                        PsdpConfig(reset=ResetDistribution(rho), off_support="base"))
    assert np.allclose(policy.probs[0, 1:], 0.5)
    assert np.allclose(policy.probs[1, 2], 0.5)
    assert policy.probs[0, 0].max() == 1.0


def test_explicit_class_certificate_and_membership():
    rng = make_rng(60)
    mdp = random_mdp(rng, 3, 2, 3)
    members = [random_policy(rng, 3, 3, 2) for _ in range(4)]
    cls = PolicyClass.explicit(members)
    reset = full_reset(rng, 3, 3)
    policy = psdp_solve(mdp, cls, mdp.reward, PsdpConfig(reset=reset))
    for h in range(3):
        assert any(np.array_equal(policy.probs[h], m.probs[h]) for m in members)
    assert np.all(psdp_certificate(mdp, cls, policy, mdp.reward, reset) <= 1e-10)


def test_bitwise_deterministic():
    rng = make_rng(70)
    mdp = random_mdp(rng, 4, 3, 4)
    cls = PolicyClass.masked(random_mask(rng, 4, 3))
    reset = full_reset(rng, 4, 4)
    a = psdp_solve(mdp, cls, mdp.reward, PsdpConfig(reset=reset))
    b = psdp_solve(mdp, cls, mdp.reward, PsdpConfig(reset=reset))
    assert a.probs.tobytes() == b.probs.tobytes()


def test_errors():
    rng = make_rng(80)
    mdp = random_mdp(rng, 2, 2, 2)
    cls = PolicyClass.full(2, 2)
    with pytest.raises(ConfigurationError):
        psdp_solve(mdp, cls, mdp.reward, PsdpConfig())
    with pytest.raises(ConfigurationError):
        psdp_solve(mdp, cls, np.full((2, 2), 2.0), PsdpConfig(reset=full_reset(rng, 2, 2)))
    with pytest.raises(ConfigurationError):
        psdp_solve(mdp, cls, mdp.reward, PsdpConfig(reset=full_reset(rng, 3, 2)))
    with pytest.raises(ConfigurationError):
        PsdpConfig(epsilon=-1.0)
    with pytest.raises(ConfigurationError):
        PsdpConfig(off_support="nearest")
