"""Policy Search by Dynamic Programming with an arbitrary reset distribution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classes import PolicyClass, ResetDistribution
from .mdp import (ConfigurationError, NonstationaryPolicy, TabularMdp, check_reward,
                  evaluate_policy)

OFF_SUPPORT_RULES = ("argmax", "base")


@dataclass(frozen=True, eq=False)
class PsdpConfig:
    """Solver settings.

    ``off_support`` controls states with zero reset mass at step h: ``"argmax"``
    applies the same greedy rule there, ``"base"`` keeps the base policy
    (uniform over allowed actions unless ``base_policy`` is given). With
    ``epsilon > 0`` and ``adversarial`` set, the solver deliberately picks the
    worst action whose Q-value is within ``epsilon`` of the best.
    """

    epsilon: float = 0.0
    reset: ResetDistribution | None = None
    tie_break: str = "lowest"
    off_support: str = "argmax"
    adversarial: bool = False
    base_policy: NonstationaryPolicy | None = None

    def __post_init__(self):
        if not self.epsilon >= 0.0:
            raise ConfigurationError("epsilon must be >= 0")
        if self.tie_break != "lowest":
            raise ConfigurationError(f"unsupported tie_break {self.tie_break!r}")
        if self.off_support not in OFF_SUPPORT_RULES:
            raise ConfigurationError(f"off_support must be one of {OFF_SUPPORT_RULES}")

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "tie_break": self.tie_break,
                "off_support": self.off_support, "adversarial": self.adversarial,
                "reset": None if self.reset is None else self.reset.to_dict()}


def _select(q: np.ndarray, allowed: np.ndarray, epsilon: float, adversarial: bool) -> np.ndarray:
    """Per-state action choice over allowed actions, lowest index on ties."""
    qa = np.where(allowed, q, -np.inf)
    if epsilon > 0.0 and adversarial:
        near = allowed & (q >= qa.max(axis=1, keepdims=True) - epsilon)
        return np.where(near, q, np.inf).argmin(axis=1)
    return qa.argmax(axis=1)


def psdp_solve(mdp: TabularMdp, policy_class: PolicyClass, reward,
               config: PsdpConfig) -> NonstationaryPolicy:
    """Backward sweep choosing, at each step, the class member maximizing the
    reset-weighted advantage of the already-fixed continuation."""
    if config.reset is None:
        raise ConfigurationError("PSDP needs a reset distribution")
    r = check_reward(reward, mdp.num_states, mdp.num_actions)
    policy_class.check(mdp)
    rho = config.reset.per_step
    H, S, A = mdp.shape
    if rho.shape != (H, S):
        raise ConfigurationError("reset distribution shape does not match the MDP")
    if np.any(rho.sum(axis=1) <= 0.0):
        raise ConfigurationError("reset distribution has an empty step")
    probs = np.zeros((H, S, A))
    v_next = np.zeros(S)
    eye = np.eye(A)
    base = config.base_policy
    if base is None and policy_class.kind == "masked":
        base = policy_class.base_policy(H)
    for h in range(H - 1, -1, -1):
        q = r + mdp.transitions[h] @ v_next
        if policy_class.kind == "explicit":
            # Q and A differ by a per-state constant that is the same for every member
            scores = [float(rho[h] @ np.sum(m.probs[h] * q, axis=1)) for m in policy_class.members]
            probs[h] = policy_class.members[int(np.argmax(scores))].probs[h]
        else:
            chosen = eye[_select(q, policy_class.allowed, config.epsilon, config.adversarial)]
            if config.off_support == "base":
                chosen = np.where((rho[h] > 0.0)[:, None], chosen, base.probs[h])
            probs[h] = chosen
        v_next = np.sum(probs[h] * q, axis=1)
    return NonstationaryPolicy(probs)


def psdp_certificate(mdp: TabularMdp, policy_class: PolicyClass, policy: NonstationaryPolicy,
                     reward, reset: ResetDistribution) -> np.ndarray:
    """Per-step best in-class reset-weighted advantage of ``policy``; shape ``(H,)``."""
    adv = evaluate_policy(mdp, policy, reward).advantage
    rho = reset.per_step
    if policy_class.kind == "masked":
        best = np.where(policy_class.allowed, adv, -np.inf).max(axis=-1)
        return np.einsum("hs,hs->h", rho, best)
    per_member = np.array([np.einsum("hs,hsa,hsa->h", rho, m.probs, adv)
                           for m in policy_class.members])
    return per_member.max(axis=0)
