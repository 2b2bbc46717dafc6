"""Finite-horizon tabular MDPs and exact dynamic-programming primitives.

Conventions used throughout the package:

* time steps are 0-based internally (``h = 0 .. H-1``) even though the
  mathematics is usually written with ``h = 1 .. H``;
* transitions are stored dense with shape ``(H, S, A, S)``;
* policies are stored as ``(H, S, A)`` action-probability tables;
* rewards are ``(S, A)`` tables with entries in ``[0, 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

PROB_ATOL = 1e-12
OCC_ATOL = 1e-10


class ConfigurationError(ValueError):
    """Raised for malformed or dimensionally inconsistent inputs."""


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains non-finite entries")
    return arr


def check_reward(reward, num_states: int, num_actions: int) -> np.ndarray:
    """Validate a reward table and return it as a float array."""
    r = _as_float_array(reward, "reward")
    if r.shape != (num_states, num_actions):
        raise ConfigurationError(
            f"reward has shape {r.shape}, expected {(num_states, num_actions)}")
    if r.min(initial=0.0) < 0.0 or r.max(initial=0.0) > 1.0:
        raise ConfigurationError("reward entries must lie in [0, 1]")
    return r


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite-horizon MDP with time-indexed transition kernels."""

    transitions: np.ndarray  # (H, S, A, S)
    reward: np.ndarray  # (S, A), the true reward r*
    start_dist: np.ndarray  # (S,)

    def __post_init__(self):
        P = _as_float_array(self.transitions, "transitions")
        if P.ndim != 4 or P.shape[1] != P.shape[3]:
            raise ConfigurationError(
                f"transitions must have shape (H, S, A, S), got {P.shape}")
        H, S, A, _ = P.shape
        if H < 1 or S < 1 or A < 1:
            raise ConfigurationError("horizon, states and actions must be positive")
        if P.min() < 0.0:
            raise ConfigurationError("transition probabilities must be nonnegative")
        if np.max(np.abs(P.sum(axis=-1) - 1.0)) > PROB_ATOL:
            raise ConfigurationError("transition rows must sum to 1")
        mu = _as_float_array(self.start_dist, "start_dist")
        if mu.shape != (S,):
            raise ConfigurationError(f"start_dist has shape {mu.shape}, expected {(S,)}")
        if mu.min() < 0.0 or abs(mu.sum() - 1.0) > PROB_ATOL:
            raise ConfigurationError("start_dist must be a probability vector")
        r = check_reward(self.reward, S, A)
        for arr in (P, mu, r):
            arr.setflags(write=False)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "start_dist", mu)
        object.__setattr__(self, "reward", r)

    @classmethod
    def time_homogeneous(cls, kernel, reward, start_dist, horizon: int) -> "TabularMdp":
        """Build an MDP by replicating a single ``(S, A, S)`` kernel ``horizon`` times."""
        if int(horizon) < 1:
            raise ConfigurationError("horizon must be >= 1")
        kernel = _as_float_array(kernel, "transitions")
        return cls(np.repeat(kernel[None], int(horizon), axis=0), reward, start_dist)

    @property
    def horizon(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.horizon, self.num_states, self.num_actions

    def to_dict(self) -> dict:
        H = self.horizon
        homogeneous = all(np.array_equal(self.transitions[0], self.transitions[h])
                          for h in range(1, H))
        doc = {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "horizon": H,
            "start_dist": self.start_dist.tolist(),
            "reward": self.reward.tolist(),
        }
        if homogeneous:
            doc["time_homogeneous"] = True
            doc["transitions"] = self.transitions[0].tolist()
        else:
            doc["transitions"] = self.transitions.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "TabularMdp":
        try:
            S, A, H = int(doc["num_states"]), int(doc["num_actions"]), int(doc["horizon"])
            P = np.array(doc["transitions"], dtype=np.float64)
            if doc.get("time_homogeneous", False):
                if P.shape != (S, A, S):
                    raise ConfigurationError(
                        f"time-homogeneous transitions must be {(S, A, S)}, got {P.shape}")
                return cls.time_homogeneous(P, doc["reward"], doc["start_dist"], H)
            if P.shape != (H, S, A, S):
                raise ConfigurationError(
                    f"transitions must be {(H, S, A, S)}, got {P.shape}")
            return cls(P, doc["reward"], doc["start_dist"])
        except KeyError as exc:
            raise ConfigurationError(f"MDP document missing field {exc}") from None


@dataclass(frozen=True, eq=False)
class NonstationaryPolicy:
    """Per-timestep stochastic policy ``probs[h, s, a] = pi_h(a | s)``."""

    probs: np.ndarray

    def __post_init__(self):
        p = _as_float_array(self.probs, "policy")
        if p.ndim != 3:
            raise ConfigurationError(f"policy must have shape (H, S, A), got {p.shape}")
        if p.min() < 0.0 or np.max(np.abs(p.sum(axis=-1) - 1.0)) > PROB_ATOL:
            raise ConfigurationError("policy rows must be probability vectors")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_actions(cls, actions, num_actions: int) -> "NonstationaryPolicy":
        """Deterministic policy from an ``(H, S)`` integer action table."""
        actions = np.asarray(actions, dtype=np.int64)
        probs = np.zeros(actions.shape + (num_actions,))
        np.put_along_axis(probs, actions[..., None], 1.0, axis=-1)
        return cls(probs)

    @classmethod
    def uniform(cls, horizon: int, num_states: int, num_actions: int) -> "NonstationaryPolicy":
        return cls(np.full((horizon, num_states, num_actions), 1.0 / num_actions))

    @property
    def horizon(self) -> int:
        return self.probs.shape[0]

    @property
    def num_states(self) -> int:
        return self.probs.shape[1]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[2]

    def is_deterministic(self) -> bool:
        return bool(np.all((self.probs == 0.0) | (self.probs == 1.0)))

    def actions(self) -> np.ndarray:
        """Most likely action per ``(h, s)`` (lowest index on ties)."""
        return np.argmax(self.probs, axis=-1)

    def to_dict(self) -> dict:
        if self.is_deterministic():
            return {"deterministic": True, "num_actions": self.num_actions,
                    "actions": self.actions().tolist()}
        return {"deterministic": False, "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "NonstationaryPolicy":
        if doc.get("deterministic"):
            return cls.from_actions(doc["actions"], int(doc["num_actions"]))
        return cls(doc["probs"])


@dataclass(frozen=True, eq=False)
class OccupancyTensor:
    """Exact state-action visitation probabilities, one table per time step."""

    per_step: np.ndarray  # (H, S, A)

    @property
    def averaged(self) -> np.ndarray:
        return self.per_step.mean(axis=0)

    @property
    def state_per_step(self) -> np.ndarray:
        return self.per_step.sum(axis=-1)

    @property
    def horizon(self) -> int:
        return self.per_step.shape[0]


class PolicyEvaluation(NamedTuple):
    q: np.ndarray  # (H, S, A)
    v: np.ndarray  # (H + 1, S), v[H] == 0
    advantage: np.ndarray  # (H, S, A)


def check_compatible(mdp: TabularMdp, policy: NonstationaryPolicy) -> None:
    if policy.probs.shape != mdp.shape:
        raise ConfigurationError(
            f"policy shape {policy.probs.shape} does not match MDP {mdp.shape}")


def compute_occupancy(mdp: TabularMdp, policy: NonstationaryPolicy) -> OccupancyTensor:
    """Forward recursion for ``d_h(s, a)`` starting from ``mu``."""
    check_compatible(mdp, policy)
    H = mdp.horizon
    pi = policy.probs
    d = np.empty(mdp.shape)
    d[0] = mdp.start_dist[:, None] * pi[0]
    for h in range(H - 1):
        nxt = np.einsum("sa,sat->t", d[h], mdp.transitions[h])
        d[h + 1] = nxt[:, None] * pi[h + 1]
    return OccupancyTensor(d)


def evaluate_policy(mdp: TabularMdp, policy: NonstationaryPolicy, reward=None) -> PolicyEvaluation:
    """Backward recursion for ``Q_h``, ``V_h`` and ``A_h = Q_h - V_h``.

    ``reward`` defaults to the MDP's true reward.
    """
    check_compatible(mdp, policy)
    r = mdp.reward if reward is None else check_reward(reward, mdp.num_states, mdp.num_actions)
    H, S, A = mdp.shape
    q = np.empty((H, S, A))
    v = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        q[h] = r + mdp.transitions[h] @ v[h + 1]
        v[h] = np.einsum("sa,sa->s", policy.probs[h], q[h])
    return PolicyEvaluation(q, v, q - v[:H, :, None])


def policy_value(mdp: TabularMdp, policy: NonstationaryPolicy, reward=None) -> float:
    """``J(pi, r) = H * <d^pi, r>`` from the exact occupancy measure."""
    r = mdp.reward if reward is None else check_reward(reward, mdp.num_states, mdp.num_actions)
    occ = compute_occupancy(mdp, policy)
    return float(mdp.horizon * np.sum(occ.averaged * r))


def value_from_occupancy(occupancy: OccupancyTensor, reward) -> float:
    return float(np.einsum("hsa,sa->", occupancy.per_step, np.asarray(reward, dtype=float)))


def performance_difference(mdp: TabularMdp, policy_a: NonstationaryPolicy,
                           policy_b: NonstationaryPolicy, reward=None) -> float:
    """``sum_h E_{d_h^{pi_a}}[A_h^{pi_b}]``, which equals ``J(pi_a) - J(pi_b)``."""
    occ_a = compute_occupancy(mdp, policy_a)
    adv_b = evaluate_policy(mdp, policy_b, reward).advantage
    return float(np.sum(occ_a.per_step * adv_b))
