"""The reset-based IRL outer loop: Hedge over base rewards against PSDP responses.

MM, FILTER and GUITAR share this code path and differ only in the reset
distribution handed to PSDP.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .classes import PolicyClass, ResetDistribution, RewardClass
from .demos import DemoDataset
from .mdp import (ConfigurationError, NonstationaryPolicy, OccupancyTensor, TabularMdp,
                  compute_occupancy)
from .psdp import PsdpConfig, psdp_solve


@dataclass(frozen=True, eq=False)
class RewardIterate:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.min() < 0.0 or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigurationError("reward weights must be a probability vector")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, num_rewards: int) -> "RewardIterate":
        return cls(np.full(num_rewards, 1.0 / num_rewards))

    def effective(self, reward_class: RewardClass) -> np.ndarray:
        return reward_class.effective(self.weights)


def expert_feature_means(reward_class: RewardClass, demos: DemoDataset | None = None,
                         occupancy: OccupancyTensor | None = None) -> np.ndarray:
    """Per-base-reward expert mean: demo average (sample mode) or exact occupancy average."""
    if (demos is None) == (occupancy is None):
        raise ConfigurationError("give exactly one of demos or occupancy")
    dist = occupancy.averaged if occupancy is not None else demos.empirical_pair_distribution()
    return np.einsum("sa,ksa->k", dist, reward_class.base)


def empirical_loss(reward, policy_occupancy: OccupancyTensor, expert_demos: DemoDataset | None = None,
                   expert_occupancy: OccupancyTensor | None = None) -> float:
    """``L(pi, r) = E_expert[r] - <d^pi, r>`` with averaged occupancies."""
    r = np.asarray(reward, dtype=float)
    if expert_occupancy is not None:
        expert = float(np.sum(expert_occupancy.averaged * r))
    elif expert_demos is not None:
        if len(expert_demos) == 0:
            raise ConfigurationError("empty expert demos")
        expert = float(np.mean(r[expert_demos.states, expert_demos.actions]))
    else:
        raise ConfigurationError("need expert demos or an expert occupancy")
    return expert - float(np.sum(policy_occupancy.averaged * r))


def default_learning_rate(num_rewards: int, iterations: int, bound: float = 1.0) -> float:
    """``sqrt(2 ln K / (n B^2))``; a single reward gets rate 0 (nothing to learn)."""
    if num_rewards <= 1:
        return 0.0
    return math.sqrt(2.0 * math.log(num_rewards) / (iterations * bound**2))


def omd_reward_step(state: RewardIterate, loss_gradient, learning_rate: float) -> RewardIterate:
    """Entropic mirror ascent step ``w_k <- w_k exp(eta g_k) / Z``."""
    if not learning_rate > 0.0:
        raise ConfigurationError("learning_rate must be positive")
    g = np.asarray(loss_gradient, dtype=float)
    with np.errstate(divide="ignore"):
        logits = np.log(state.weights) + learning_rate * g
    logits -= logits.max()
    w = np.exp(logits)
    return RewardIterate(w / w.sum())


def hedge_weights(cumulative_gain: np.ndarray, learning_rate: float) -> np.ndarray:
    """FTRL/Hedge closed form from uniform start: ``w ~ exp(eta * sum of past gains)``."""
    z = learning_rate * np.asarray(cumulative_gain, dtype=float)
    w = np.exp(z - z.max())
    return w / w.sum()


def average_regret(gains: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Running average regret ``(1/i)[max_k sum g_k - sum <w_j, g_j>]``; shape ``(n,)``."""
    gains = np.asarray(gains, dtype=float)
    earned = np.cumsum(np.einsum("ik,ik->i", weights, gains))
    best = np.cumsum(gains, axis=0).max(axis=1)
    return (best - earned) / np.arange(1, len(gains) + 1)


@dataclass
class GuitarRunResult:
    weights: np.ndarray  # (n, K) weights used at each iteration
    policies: list[NonstationaryPolicy] = field(repr=False)
    base_losses: np.ndarray  # (n, K) L(pi_i, base_k)
    loss: np.ndarray  # (n,) L(pi_i, r_i)
    j_rstar: np.ndarray  # (n,) J(pi_i, r*)
    gap: np.ndarray  # (n,) J(pi_E, r*) - J(pi_i, r*), nan without a reference
    regret_avg: np.ndarray  # (n,)
    validation_scores: np.ndarray  # (n,)
    selected_index: int
    learning_rate: float

    @property
    def iterations(self) -> int:
        return len(self.policies)

    @property
    def selected_policy(self) -> NonstationaryPolicy:
        return self.policies[self.selected_index]

    @property
    def selected_gap(self) -> float:
        return float(self.gap[self.selected_index])

    @property
    def mixture_gap(self) -> float:
        """Gap of the trajectory-level average of all iterates."""
        return float(np.mean(self.gap))

    def trace_rows(self) -> list[tuple]:
        return [(i + 1, float(self.j_rstar[i]), float(self.gap[i]), float(self.regret_avg[i]),
                 float(self.loss[i])) for i in range(self.iterations)]

    def to_dict(self, include_policies: bool = False) -> dict:
        doc = {
            "iterations": self.iterations,
            "learning_rate": self.learning_rate,
            "weights": self.weights.tolist(),
            "base_losses": self.base_losses.tolist(),
            "loss": self.loss.tolist(),
            "J_pi_rstar": self.j_rstar.tolist(),
            "gap": self.gap.tolist(),
            "regret_avg": self.regret_avg.tolist(),
            "validation_scores": self.validation_scores.tolist(),
            "selected_index": self.selected_index,
            "selected_gap": self.selected_gap,
            "mixture_gap": self.mixture_gap,
        }
        if include_policies:
            doc["selected_policy"] = self.selected_policy.to_dict()
        return doc


def guitar_run(mdp: TabularMdp, policy_class: PolicyClass, reward_class: RewardClass,
               reset: ResetDistribution, iterations: int, *,
               expert_demos: DemoDataset | None = None,
               expert_occupancy: OccupancyTensor | None = None,
               psdp_config: PsdpConfig | None = None,
               validation_demos: DemoDataset | None = None,
               reference_occupancy: OccupancyTensor | None = None,
               learning_rate: float | None = None, adaptive: bool = False) -> GuitarRunResult:
    """Run ``iterations`` rounds of reward Hedge against PSDP best responses.

    Exactly one of ``expert_demos`` (sample mode) and ``expert_occupancy``
    (exact-expert mode) defines the training loss. Gaps under ``mdp.reward`` are
    measured against ``reference_occupancy``, defaulting to ``expert_occupancy``.
    The selected iterate minimizes the worst base-reward loss on
    ``validation_demos`` (or on the training expert data when none are given).
    """
    if iterations < 1:
        raise ConfigurationError("iterations must be >= 1")
    K = len(reward_class)
    expert_means = expert_feature_means(reward_class, expert_demos, expert_occupancy)
    val_means = (expert_means if validation_demos is None
                 else expert_feature_means(reward_class, demos=validation_demos))
    reference = reference_occupancy if reference_occupancy is not None else expert_occupancy
    j_ref = (np.nan if reference is None
             else float(np.einsum("hsa,sa->", reference.per_step, mdp.reward)))
    base_cfg = psdp_config or PsdpConfig()
    config = PsdpConfig(epsilon=base_cfg.epsilon, reset=reset, tie_break=base_cfg.tie_break,
                        off_support=base_cfg.off_support, adversarial=base_cfg.adversarial,
                        base_policy=base_cfg.base_policy)
    eta = default_learning_rate(K, iterations) if learning_rate is None else float(learning_rate)
    cumulative = np.zeros(K)
    weights = np.empty((iterations, K))
    gains = np.empty((iterations, K))
    val_gains = np.empty((iterations, K))
    j_rstar = np.empty(iterations)
    policies = []
    for i in range(iterations):
        rate = math.sqrt(2.0 * math.log(K) / (i + 1)) if adaptive and K > 1 else eta
        w = hedge_weights(cumulative, rate)
        weights[i] = w
        policy = psdp_solve(mdp, policy_class, reward_class.effective(w), config)
        occ = compute_occupancy(mdp, policy)
        achieved = np.einsum("sa,ksa->k", occ.averaged, reward_class.base)
        gains[i] = expert_means - achieved
        val_gains[i] = val_means - achieved
        j_rstar[i] = float(np.einsum("hsa,sa->", occ.per_step, mdp.reward))
        cumulative += gains[i]
        policies.append(policy)
    scores = val_gains.max(axis=1)
    return GuitarRunResult(
        weights=weights, policies=policies, base_losses=gains,
        loss=np.einsum("ik,ik->i", weights, gains), j_rstar=j_rstar, gap=j_ref - j_rstar,
        regret_avg=average_regret(gains, weights), validation_scores=scores,
        selected_index=int(np.argmin(scores)), learning_rate=eta)


# --------------------------------------------------------------------------
# reset distributions


def reset_start_state(mdp: TabularMdp) -> ResetDistribution:
    return ResetDistribution(np.broadcast_to(mdp.start_dist, (mdp.horizon, mdp.num_states)),
                             "start_state")


def reset_from_occupancy(mdp: TabularMdp, policy: NonstationaryPolicy,
                         label: str = "occupancy") -> ResetDistribution:
    return ResetDistribution(compute_occupancy(mdp, policy).state_per_step, label)


def _empirical_reset(steps, states, horizon, num_states, fill, label) -> ResetDistribution:
    counts = np.zeros((horizon, num_states))
    np.add.at(counts, (np.asarray(steps), np.asarray(states)), 1.0)
    totals = counts.sum(axis=1)
    if totals.sum() == 0:
        raise ConfigurationError(f"reset {label!r}: no samples")
    empty = totals == 0
    if empty.any():
        if fill is None:
            missing = np.flatnonzero(empty).tolist()
            raise ConfigurationError(f"reset {label!r}: no samples at steps {missing}")
        counts[empty] = np.asarray(fill, dtype=float)
        totals = counts.sum(axis=1)
    return ResetDistribution(counts / totals[:, None], label)


def reset_from_demos(demos: DemoDataset, fill=None, label: str = "") -> ResetDistribution:
    """Per-step empirical state distribution; ``fill`` is used at steps without samples."""
    return _empirical_reset(demos.steps, demos.states, demos.horizon, demos.num_states,
                            fill, label or f"{demos.source}_demos")


def reset_mixture(expert_demos: DemoDataset, offline_demos: DemoDataset, fill=None) -> ResetDistribution:
    """Uniform over the union of samples at each step.

    With equal per-step counts this is the ``N/(N+M)``, ``M/(N+M)`` weighting.
    """
    pooled = expert_demos.concat(offline_demos)
    return reset_from_demos(pooled, fill, "mixture")


def trajectory_filter(kind: str, value) -> Callable[[np.ndarray], bool]:
    """Predicate on a trajectory's state sequence: ``min_length``, ``max_length``, ``visits_state``."""
    if kind == "min_length":
        return lambda states: len(states) >= int(value)
    if kind == "max_length":
        return lambda states: len(states) <= int(value)
    if kind == "visits_state":
        return lambda states: bool(np.any(states == int(value)))
    raise ConfigurationError(f"unknown trajectory filter {kind!r}")


def reset_from_demo_subset(demos: DemoDataset, keep: Callable[[np.ndarray], bool],
                           fill=None) -> ResetDistribution:
    mask = np.zeros(len(demos), dtype=bool)
    for t in np.unique(demos.trajectories):
        rows = demos.trajectories == t
        if keep(demos.states[rows]):
            mask |= rows
    if not mask.any():
        raise ConfigurationError("demo subset filter removed every trajectory")
    sub = demos.subset(mask)
    return reset_from_demos(sub, fill, "demo_subset")


def make_reset_distribution(kind: str, *, mdp: TabularMdp | None = None,
                            expert_demos: DemoDataset | None = None,
                            offline_demos: DemoDataset | None = None,
                            policy: NonstationaryPolicy | None = None,
                            keep: Callable[[np.ndarray], bool] | None = None,
                            fill=None) -> ResetDistribution:
    """Dispatch on ``kind`` in {start_state, expert_demos, offline_demos, mixture,
    occupancy, demo_subset}."""
    def need(obj, name):
        if obj is None:
            raise ConfigurationError(f"reset {kind!r} needs {name}")
        return obj

    if kind == "start_state":
        return reset_start_state(need(mdp, "an MDP"))
    if kind == "expert_demos":
        return reset_from_demos(need(expert_demos, "expert demos"), fill, "expert_demos")
    if kind == "offline_demos":
        return reset_from_demos(need(offline_demos, "offline demos"), fill, "offline_demos")
    if kind == "mixture":
        return reset_mixture(need(expert_demos, "expert demos"),
                             need(offline_demos, "offline demos"), fill)
    if kind == "occupancy":
        return reset_from_occupancy(need(mdp, "an MDP"), need(policy, "a policy"))
    if kind == "demo_subset":
        return reset_from_demo_subset(need(expert_demos, "demos"), need(keep, "a filter"), fill)
    raise ConfigurationError(f"unknown reset kind {kind!r}")
