"""Random instance generators used by tests, property checks and scenarios."""
from __future__ import annotations

import numpy as np

from .mdp import NonstationaryPolicy, TabularMdp


def random_mdp(rng: np.random.Generator, num_states: int, num_actions: int, horizon: int,
               concentration: float = 1.0, reward=None) -> TabularMdp:
    """Dirichlet transitions per ``(h, s, a)``, uniform rewards and start distribution."""
    P = rng.dirichlet(np.full(num_states, concentration),
                      size=(horizon, num_states, num_actions))
    # renormalize so rows sum to 1 at double precision
    P /= P.sum(axis=-1, keepdims=True)
    r = rng.random((num_states, num_actions)) if reward is None else reward
    mu = rng.dirichlet(np.ones(num_states))
    mu /= mu.sum()
    return TabularMdp(P, r, mu)


def random_policy(rng: np.random.Generator, horizon: int, num_states: int, num_actions: int,
                  deterministic: bool = False, allowed=None) -> NonstationaryPolicy:
    """Random policy, optionally supported on ``allowed`` (an ``(S, A)`` mask)."""
    mask = np.ones((num_states, num_actions), bool) if allowed is None else np.asarray(allowed, bool)
    if deterministic:
        scores = np.where(mask[None], rng.random((horizon, num_states, num_actions)), -1.0)
        return NonstationaryPolicy.from_actions(scores.argmax(axis=-1), num_actions)
    p = rng.random((horizon, num_states, num_actions)) * mask[None]
    p /= p.sum(axis=-1, keepdims=True)
    return NonstationaryPolicy(p)


def random_mask(rng: np.random.Generator, num_states: int, num_actions: int,
                keep_prob: float = 0.6) -> np.ndarray:
    """Random allowed-action mask with at least one allowed action per state
    and at least one forbidden action somewhere (when ``num_actions > 1``)."""
    mask = rng.random((num_states, num_actions)) < keep_prob
    for s in range(num_states):
        if not mask[s].any():
            mask[s, rng.integers(num_actions)] = True
    if num_actions > 1 and mask.all():
        s = rng.integers(num_states)
        mask[s, rng.integers(num_actions)] = False
    return mask


def optimal_policy(mdp: TabularMdp, reward=None, allowed=None) -> NonstationaryPolicy:
    """Deterministic backward-induction optimum, lowest action on ties."""
    r = mdp.reward if reward is None else np.asarray(reward, float)
    H, S, A = mdp.shape
    mask = np.ones((S, A), bool) if allowed is None else np.asarray(allowed, bool)
    v = np.zeros(S)
    actions = np.empty((H, S), dtype=np.int64)
    for h in range(H - 1, -1, -1):
        q = np.where(mask, r + mdp.transitions[h] @ v, -np.inf)
        actions[h] = q.argmax(axis=1)
        v = q.max(axis=1)
    return NonstationaryPolicy.from_actions(actions, A)


def optimal_value(mdp: TabularMdp, reward=None, allowed=None) -> float:
    r = mdp.reward if reward is None else np.asarray(reward, float)
    H, S, A = mdp.shape
    mask = np.ones((S, A), bool) if allowed is None else np.asarray(allowed, bool)
    v = np.zeros(S)
    for h in range(H - 1, -1, -1):
        v = np.where(mask, r + mdp.transitions[h] @ v, -np.inf).max(axis=1)
    return float(mdp.start_dist @ v)


def tremble_policy(policy: NonstationaryPolicy, tremble: float) -> NonstationaryPolicy:
    """The behavior policy actually executed when sampling with ``tremble``."""
    A = policy.num_actions
    return NonstationaryPolicy((1.0 - tremble) * policy.probs + tremble / A)
