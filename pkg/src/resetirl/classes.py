"""Policy and reward classes and the structural quantities defined on them.

A masked policy class contains every nonstationary policy whose support at
state ``s`` is inside ``allowed[s]``; its deterministic members are indexed in
mixed radix with ``(h, s)`` ordered h-major and allowed actions ascending.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse

from .demos import DemoDataset, make_rng
from .mdp import (ConfigurationError, NonstationaryPolicy, OccupancyTensor, TabularMdp,
                  check_reward, compute_occupancy, evaluate_policy, policy_value)

DEFAULT_BUDGET = 10**6


class BudgetExceeded(RuntimeError):
    """An exact enumeration would exceed the configured budget."""

    def __init__(self, message: str, required: int | None = None):
        super().__init__(message)
        self.required = required


@dataclass(frozen=True, eq=False)
class PolicyClass:
    allowed: np.ndarray | None = None
    members: tuple[NonstationaryPolicy, ...] | None = None

    def __post_init__(self):
        if (self.allowed is None) == (self.members is None):
            raise ConfigurationError("policy class must be either masked or explicit")
        if self.allowed is not None:
            mask = np.array(self.allowed, dtype=bool)
            if mask.ndim != 2 or not mask.any(axis=1).all():
                raise ConfigurationError("every state needs at least one allowed action")
            mask.setflags(write=False)
            object.__setattr__(self, "allowed", mask)
        else:
            members = tuple(self.members)
            if not members:
                raise ConfigurationError("explicit policy class must be nonempty")
            shapes = {m.probs.shape for m in members}
            if len(shapes) != 1:
                raise ConfigurationError("explicit policy class members differ in shape")
            object.__setattr__(self, "members", members)

    @classmethod
    def masked(cls, allowed) -> "PolicyClass":
        return cls(allowed=allowed)

    @classmethod
    def full(cls, num_states: int, num_actions: int) -> "PolicyClass":
        return cls(allowed=np.ones((num_states, num_actions), dtype=bool))

    @classmethod
    def explicit(cls, policies) -> "PolicyClass":
        return cls(members=tuple(policies))

    @property
    def kind(self) -> str:
        return "masked" if self.allowed is not None else "explicit"

    def check(self, mdp: TabularMdp) -> None:
        if self.kind == "masked":
            if self.allowed.shape != (mdp.num_states, mdp.num_actions):
                raise ConfigurationError("mask shape does not match the MDP")
        elif self.members[0].probs.shape != mdp.shape:
            raise ConfigurationError("class members do not match the MDP")

    def contains(self, policy: NonstationaryPolicy, atol: float = 0.0) -> bool:
        if self.kind == "masked":
            return bool(np.all(policy.probs[:, ~self.allowed] <= atol))
        return any(np.allclose(policy.probs, m.probs, atol=atol, rtol=0.0) for m in self.members)

    def num_deterministic(self, horizon: int) -> int:
        if self.kind == "explicit":
            return len(self.members)
        return math.prod(int(c) for c in self.allowed.sum(axis=1)) ** horizon

    def log_size(self, horizon: int) -> float:
        """Natural log of the number of (deterministic) members."""
        if self.kind == "explicit":
            return math.log(len(self.members))
        return horizon * float(np.sum(np.log(self.allowed.sum(axis=1))))

    def base_policy(self, horizon: int) -> NonstationaryPolicy:
        """Uniform over allowed actions (masked) or the first member (explicit)."""
        if self.kind == "explicit":
            return self.members[0]
        row = self.allowed / self.allowed.sum(axis=1, keepdims=True)
        return NonstationaryPolicy(np.broadcast_to(row, (horizon,) + row.shape).copy())

    def deterministic_member(self, index: int, horizon: int) -> NonstationaryPolicy:
        if self.kind == "explicit":
            return self.members[index]
        S, A = self.allowed.shape
        options = [np.flatnonzero(self.allowed[s]) for s in range(S)]
        actions = np.empty((horizon, S), dtype=np.int64)
        rem = int(index)
        for h in range(horizon - 1, -1, -1):
            for s in range(S - 1, -1, -1):
                rem, d = divmod(rem, len(options[s]))
                actions[h, s] = options[s][d]
        if rem:
            raise IndexError("deterministic member index out of range")
        return NonstationaryPolicy.from_actions(actions, A)

    def member_index(self, actions) -> int:
        """Mixed-radix index of a deterministic masked member given its action table."""
        options = [list(np.flatnonzero(row)) for row in self.allowed]
        idx = 0
        for h_actions in np.asarray(actions):
            for s, a in enumerate(h_actions):
                idx = idx * len(options[s]) + options[s].index(int(a))
        return idx

    def to_dict(self) -> dict:
        if self.kind == "masked":
            return {"kind": "masked", "allowed": self.allowed.tolist()}
        return {"kind": "explicit", "members": [m.to_dict() for m in self.members]}

    @classmethod
    def from_dict(cls, doc: dict) -> "PolicyClass":
        if doc.get("kind") == "masked":
            return cls.masked(doc["allowed"])
        if doc.get("kind") == "explicit":
            return cls.explicit(NonstationaryPolicy.from_dict(m) for m in doc["members"])
        raise ConfigurationError(f"unknown policy class kind {doc.get('kind')!r}")


@dataclass(frozen=True, eq=False)
class RewardClass:
    """Convex hull of a finite list of base reward tables."""

    base: np.ndarray  # (K, S, A)
    names: tuple[str, ...] = ()

    def __post_init__(self):
        base = np.array(self.base, dtype=np.float64)
        if base.ndim != 3 or base.shape[0] < 1:
            raise ConfigurationError("reward class needs a nonempty (K, S, A) base list")
        for r in base:
            check_reward(r, base.shape[1], base.shape[2])
        base.setflags(write=False)
        object.__setattr__(self, "base", base)
        names = tuple(self.names) or tuple(f"r{k}" for k in range(base.shape[0]))
        if len(names) != base.shape[0]:
            raise ConfigurationError("reward names do not match the base list")
        object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return self.base.shape[0]

    def effective(self, weights) -> np.ndarray:
        return np.clip(np.tensordot(np.asarray(weights, dtype=float), self.base, axes=1), 0.0, 1.0)

    def index_of(self, reward, atol: float = 0.0) -> int | None:
        for k, r in enumerate(self.base):
            if np.allclose(r, reward, atol=atol, rtol=0.0):
                return k
        return None

    def to_dict(self) -> dict:
        return {"names": list(self.names), "base_rewards": self.base.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "RewardClass":
        return cls(doc["base_rewards"], tuple(doc.get("names", ())))


@dataclass(frozen=True, eq=False)
class ResetDistribution:
    per_step: np.ndarray  # (H, S)
    label: str = ""

    def __post_init__(self):
        rho = np.array(self.per_step, dtype=np.float64)
        if rho.ndim != 2:
            raise ConfigurationError("reset distribution must have shape (H, S)")
        if rho.min() < 0.0 or np.max(np.abs(rho.sum(axis=1) - 1.0)) > 1e-10:
            raise ConfigurationError("every reset row must be a probability vector")
        rho.setflags(write=False)
        object.__setattr__(self, "per_step", rho)

    @property
    def horizon(self) -> int:
        return self.per_step.shape[0]

    @property
    def averaged(self) -> np.ndarray:
        return self.per_step.mean(axis=0)

    def to_dict(self) -> dict:
        return {"label": self.label, "per_step": self.per_step.tolist()}


@dataclass
class CompletenessReport:
    """Worst-case completeness error over a policy class and reward class.

    ``per_pair_errors`` is ``(num_members, K)`` for explicit classes. For masked
    classes it holds the per-reward maximum over members, shape ``(K,)``.
    When ``exact`` is False, ``epsilon_pi`` is a lower bound attained by a
    concrete member and ``upper_bound`` is a certified upper bound.
    """

    epsilon_pi: float
    worst_pair: tuple[int | None, int]
    per_pair_errors: np.ndarray
    exact: bool
    upper_bound: float
    evaluations: int
    worst_policy: NonstationaryPolicy | None = field(default=None, repr=False)

    @property
    def lower_bound_only(self) -> bool:
        return not self.exact

    def to_dict(self) -> dict:
        doc = {
            "epsilon_pi": self.epsilon_pi,
            "worst_pair": {"policy_index": self.worst_pair[0], "reward_index": self.worst_pair[1]},
            "per_pair_errors": self.per_pair_errors.tolist(),
            "exact": self.exact,
            "lower_bound_only": self.lower_bound_only,
            "upper_bound": self.upper_bound,
            "evaluations": self.evaluations,
        }
        if self.worst_policy is not None:
            doc["worst_policy"] = self.worst_policy.to_dict()
        return doc


# --------------------------------------------------------------------------
# completeness error


def _check_inputs(mdp: TabularMdp, policy_class: PolicyClass, rho: ResetDistribution):
    policy_class.check(mdp)
    if rho.per_step.shape != (mdp.horizon, mdp.num_states):
        raise ConfigurationError("reset distribution shape does not match the MDP")


def _masked_gap_terms(q: np.ndarray, allowed: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Per-step ``E_rho_h[max_a Q - max_{a allowed} Q]``; V cancels in the difference."""
    best_all = q.max(axis=-1)
    best_allowed = np.where(allowed, q, -np.inf).max(axis=-1)
    return np.einsum("...hs,...hs->...h", rho, best_all - best_allowed)


def reward_indexed_completeness(mdp: TabularMdp, policy_class: PolicyClass,
                                policy: NonstationaryPolicy, reward,
                                rho: ResetDistribution) -> float:
    """Gap between the best unrestricted and best in-class one-step advantage.

    Both expectations use the time-averaged reset distribution, so the
    per-step terms are averaged over the horizon.
    """
    _check_inputs(mdp, policy_class, rho)
    adv = evaluate_policy(mdp, policy, reward).advantage
    first = np.einsum("hs,hs->h", rho.per_step, adv.max(axis=-1))
    if policy_class.kind == "masked":
        second = np.einsum("hs,hs->h", rho.per_step,
                           np.where(policy_class.allowed, adv, -np.inf).max(axis=-1))
        total = float(np.mean(first - second))
    else:
        realizable = max(float(np.einsum("hs,hsa,hsa->", rho.per_step, m.probs, adv))
                         for m in policy_class.members)
        total = float(np.sum(first)) - realizable
        total /= mdp.horizon
    return max(total, 0.0)


def _masked_exact_search(mdp, allowed, reward, rho, budget):
    """Exact max over deterministic members via a backward search over value vectors.

    The step-h term depends on the continuation only through ``V_{h+1}``, so
    continuations with identical value vectors are merged, keeping the best
    accumulated error. Returns ``(value, actions, evaluations)``.
    """
    H, S, A = mdp.shape
    P = mdp.transitions
    options = [np.flatnonzero(allowed[s]) for s in range(S)]
    C = math.prod(len(o) for o in options)
    if H > 1 and C > budget:
        raise BudgetExceeded("exact completeness search exceeds budget", C)
    choices = (np.array(list(itertools.product(*options)), dtype=np.int64) if H > 1
               else np.array([[o[0] for o in options]]))  # (C, S)
    frontier = np.zeros((1, S))
    acc = np.zeros(1)
    parents, picks = [], []
    evaluations = 0
    for h in range(H - 1, -1, -1):
        q = reward[None] + np.einsum("sat,mt->msa", P[h], frontier)
        term = rho[h] @ (q.max(axis=-1) - np.where(allowed, q, -np.inf).max(axis=-1)).T
        acc = acc + term
        if h == 0:
            break
        M = len(frontier)
        evaluations += M * C
        if evaluations > budget:
            raise BudgetExceeded("exact completeness search exceeds budget", evaluations)
        # V_h for every (parent, choice) pair
        new_v = q[:, np.arange(S)[None, :], choices]  # (M, C, S)
        new_v = new_v.reshape(M * C, S)
        new_acc = np.repeat(acc, C)
        order = np.lexsort((np.arange(M * C), -new_acc))
        _, first = np.unique(new_v[order], axis=0, return_index=True)
        keep = np.sort(order[first])
        parents.append(keep // C)
        picks.append(keep % C)
        frontier, acc = new_v[keep], new_acc[keep]
    best = int(np.argmax(acc))
    actions = np.empty((H, S), dtype=np.int64)
    actions[0] = choices[0]
    node = best
    for level, (par, pick) in enumerate(zip(reversed(parents), reversed(picks))):
        h = level + 1
        actions[h] = choices[pick[node]]
        node = par[node]
    return float(acc[best]) / H, actions, evaluations


def _gap_upper_bound(mdp, allowed, reward, rho) -> float:
    """Certified upper bound from per-state value ranges over the class."""
    H, S, A = mdp.shape
    vmax = np.zeros(S)
    vmin = np.zeros(S)
    total = 0.0
    for h in range(H - 1, -1, -1):
        P = mdp.transitions[h]
        bound = np.zeros(S)
        for s in np.flatnonzero(rho[h] > 0):
            worst = 0.0
            for a in np.flatnonzero(~allowed[s]):
                best_cover = np.inf
                for b in np.flatnonzero(allowed[s]):
                    diff = P[s, a] - P[s, b]
                    val = reward[s, a] - reward[s, b] + np.sum(np.maximum(diff * vmax, diff * vmin))
                    best_cover = min(best_cover, val)
                worst = max(worst, best_cover)
            bound[s] = worst
        total += float(rho[h] @ bound)
        q_hi = reward + P @ vmax
        q_lo = reward + P @ vmin
        vmax = np.where(allowed, q_hi, -np.inf).max(axis=1)
        vmin = np.where(allowed, q_lo, np.inf).min(axis=1)
    return total / H


def _masked_local_search(mdp, allowed, reward, rho, rng, restarts, seeds):
    """Lower bound: coordinate ascent over deterministic members from several starts."""
    H, S, A = mdp.shape

    def score(actions):
        pol = NonstationaryPolicy.from_actions(actions, A)
        q = evaluate_policy(mdp, pol, reward).q
        return float(np.mean(_masked_gap_terms(q, allowed, rho)))

    options = [np.flatnonzero(allowed[s]) for s in range(S)]
    starts = list(seeds)
    for _ in range(restarts):
        starts.append(np.array([[rng.choice(options[s]) for s in range(S)] for _ in range(H)]))
    best_val, best_act, evals = -np.inf, None, 0
    for actions in starts:
        actions = actions.copy()
        val = score(actions)
        evals += 1
        improved = True
        while improved:
            improved = False
            for h in range(1, H):
                for s in range(S):
                    for a in options[s]:
                        if a == actions[h, s]:
                            continue
                        old = actions[h, s]
                        actions[h, s] = a
                        cand = score(actions)
                        evals += 1
                        if cand > val + 1e-15:
                            val, improved = cand, True
                        else:
                            actions[h, s] = old
        if val > best_val:
            best_val, best_act = val, actions.copy()
    return best_val, best_act, evals


def _greedy_actions(mdp, allowed, reward, sign):
    """Class policy maximizing (sign=+1) or minimizing (sign=-1) the reward."""
    H, S, A = mdp.shape
    v = np.zeros(S)
    actions = np.empty((H, S), dtype=np.int64)
    for h in range(H - 1, -1, -1):
        q = sign * (reward + mdp.transitions[h] @ v)
        actions[h] = np.where(allowed, q, -np.inf).argmax(axis=1)
        v = sign * q[np.arange(S), actions[h]]
    return actions


def reward_agnostic_completeness(mdp: TabularMdp, policy_class: PolicyClass,
                                 reward_class: RewardClass, rho: ResetDistribution,
                                 enumeration_budget: int = DEFAULT_BUDGET,
                                 allow_lower_bound: bool = True, seed: int = 0,
                                 restarts: int = 4) -> CompletenessReport:
    """Worst case of :func:`reward_indexed_completeness` over members and base rewards.

    Masked classes are searched over deterministic members. If the exact search
    exceeds ``enumeration_budget`` the report falls back to a local-search lower
    bound (``exact=False``), unless ``allow_lower_bound`` is False.
    """
    _check_inputs(mdp, policy_class, rho)
    K = len(reward_class)
    if policy_class.kind == "explicit":
        errors = np.array([[reward_indexed_completeness(mdp, policy_class, m, r, rho)
                            for r in reward_class.base] for m in policy_class.members])
        i, k = np.unravel_index(int(np.argmax(errors)), errors.shape)
        return CompletenessReport(float(errors[i, k]), (int(i), int(k)), errors, True,
                                  float(errors[i, k]), errors.size, policy_class.members[i])
    allowed = policy_class.allowed
    per_reward = np.zeros(K)
    per_actions = []
    uppers = np.zeros(K)
    evaluations = 0
    exact = True
    for k, r in enumerate(reward_class.base):
        uppers[k] = _gap_upper_bound(mdp, allowed, r, rho.per_step)
        if uppers[k] == 0.0:
            per_reward[k] = 0.0
            per_actions.append(_greedy_actions(mdp, allowed, r, 1))
            continue
        try:
            val, acts, n = _masked_exact_search(mdp, allowed, r, rho.per_step,
                                                enumeration_budget - evaluations)
            evaluations += n
            uppers[k] = val
        except BudgetExceeded as exc:
            if not allow_lower_bound:
                raise BudgetExceeded(
                    f"exact completeness needs more than {enumeration_budget} evaluations",
                    exc.required) from None
            exact = False
            seeds = [_greedy_actions(mdp, allowed, rb, sgn)
                     for rb in reward_class.base for sgn in (1, -1)]
            val, acts, n = _masked_local_search(mdp, allowed, r, rho.per_step,
                                                make_rng(seed, k), restarts, seeds)
            evaluations += n
        per_reward[k] = max(val, 0.0)
        per_actions.append(acts)
    k = int(np.argmax(per_reward))
    worst = NonstationaryPolicy.from_actions(per_actions[k], mdp.num_actions)
    index = policy_class.member_index(per_actions[k]) if exact else None
    upper = float(per_reward[k]) if exact else float(np.max(uppers))
    return CompletenessReport(float(per_reward[k]), (index, k), per_reward, exact,
                              max(upper, float(per_reward[k])), evaluations, worst)


def completeness_interval(report: CompletenessReport) -> tuple[float, float]:
    return report.epsilon_pi, report.upper_bound


# --------------------------------------------------------------------------
# optimal realizable policy


def expert_values(mdp: TabularMdp, expert: NonstationaryPolicy, reward_class: RewardClass) -> np.ndarray:
    occ = compute_occupancy(mdp, expert)
    return np.einsum("hsa,ksa->k", occ.per_step, reward_class.base)


def worst_case_gap(mdp: TabularMdp, policy: NonstationaryPolicy, reward_class: RewardClass,
                   expert: NonstationaryPolicy) -> tuple[float, int]:
    """``max_k J(expert, r_k) - J(policy, r_k)`` and the maximizing base reward."""
    occ = compute_occupancy(mdp, policy)
    gaps = expert_values(mdp, expert, reward_class) - np.einsum(
        "hsa,ksa->k", occ.per_step, reward_class.base)
    k = int(np.argmax(gaps))
    return float(gaps[k]), k


def _decode_batch(indices: np.ndarray, options: list[np.ndarray], H: int) -> np.ndarray:
    S = len(options)
    radix = np.array([len(o) for o in options], dtype=np.int64)
    out = np.empty((len(indices), H, S), dtype=np.int64)
    rem = indices.copy()
    for h in range(H - 1, -1, -1):
        for s in range(S - 1, -1, -1):
            out[:, h, s] = options[s][rem % radix[s]]
            rem //= radix[s]
    return out


def _enumerate_values(mdp: TabularMdp, options, base: np.ndarray, count: int,
                      batch: int = 4096) -> np.ndarray:
    """``J(pi, r_k)`` for every deterministic member; shape ``(count, K)``."""
    H, S, A = mdp.shape
    out = np.empty((count, base.shape[0]))
    srange = np.arange(S)
    for start in range(0, count, batch):
        idx = np.arange(start, min(count, start + batch), dtype=np.int64)
        acts = _decode_batch(idx, options, H)
        dist = np.broadcast_to(mdp.start_dist, (len(idx), S)).copy()
        vals = np.zeros((len(idx), base.shape[0]))
        for h in range(H):
            a = acts[:, h, :]
            vals += np.einsum("bs,kbs->bk", dist, base[:, srange[None, :], a])
            if h + 1 < H:
                dist = np.einsum("bs,bst->bt", dist, mdp.transitions[h][srange[None, :], a])
        out[idx] = vals
    return out


def _policy_from_occupancy(per_step: np.ndarray, fallback: NonstationaryPolicy) -> NonstationaryPolicy:
    mass = per_step.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(mass > 1e-12, per_step / np.where(mass > 0, mass, 1.0), fallback.probs)
    probs = np.clip(probs, 0.0, None)
    return NonstationaryPolicy(probs / probs.sum(axis=-1, keepdims=True))


def _minimax_lp(mdp: TabularMdp, allowed: np.ndarray, reward_class: RewardClass,
                targets: np.ndarray) -> np.ndarray:
    """Occupancy of a class policy minimizing ``max_k targets_k - J(pi, r_k)``."""
    H, S, A = mdp.shape
    n = H * S * A

    def var(h, s, a):
        return (h * S + s) * A + a

    rows, cols, vals = [], [], []
    b_eq = np.zeros(H * S)
    for s in range(S):
        for a in range(A):
            rows.append(s), cols.append(var(0, s, a)), vals.append(1.0)
        b_eq[s] = mdp.start_dist[s]
    for h in range(1, H):
        P = mdp.transitions[h - 1]
        for t in range(S):
            row = h * S + t
            for a in range(A):
                rows.append(row), cols.append(var(h, t, a)), vals.append(1.0)
            src_s, src_a = np.nonzero(P[:, :, t])
            for s, a in zip(src_s, src_a):
                rows.append(row), cols.append(var(h - 1, s, a)), vals.append(-P[s, a, t])
    a_eq = sparse.csr_matrix((vals, (rows, cols)), shape=(H * S, n + 1))
    rew = np.tile(reward_class.base.reshape(len(reward_class), -1), (1, H))
    a_ub = np.hstack([-rew, -np.ones((len(reward_class), 1))])
    b_ub = -np.asarray(targets)
    ub = np.tile(allowed.reshape(-1).astype(float), H)
    bounds = [(0.0, None if u else 0.0) for u in ub] + [(None, None)]
    c = np.zeros(n + 1)
    c[-1] = 1.0
    res = optimize.linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                           bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"minimax LP failed: {res.message}")
    return np.clip(res.x[:n], 0.0, None).reshape(H, S, A)


def best_realizable_policy(mdp: TabularMdp, policy_class: PolicyClass, reward_class: RewardClass,
                           expert: NonstationaryPolicy, enumeration_budget: int = DEFAULT_BUDGET,
                           method: str = "auto") -> NonstationaryPolicy:
    """Class member minimizing the worst-case gap to ``expert`` over the reward class.

    ``method``: ``"enumerate"`` (deterministic members, index-ordered argmin),
    ``"lp"`` (exact over the convex class of stochastic members), or ``"auto"``
    which enumerates when the member count fits the budget and solves the LP
    otherwise.
    """
    policy_class.check(mdp)
    targets = expert_values(mdp, expert, reward_class)
    if policy_class.kind == "explicit":
        gaps = [worst_case_gap(mdp, m, reward_class, expert)[0] for m in policy_class.members]
        return policy_class.members[int(np.argmin(gaps))]
    count = policy_class.num_deterministic(mdp.horizon)
    if method == "auto":
        method = "enumerate" if count <= enumeration_budget else "lp"
    if method == "enumerate":
        if count > enumeration_budget:
            raise BudgetExceeded(
                f"policy class has {count} deterministic members, budget {enumeration_budget}",
                count)
        options = [np.flatnonzero(row) for row in policy_class.allowed]
        values = _enumerate_values(mdp, options, reward_class.base, count)
        worst = np.max(targets[None, :] - values, axis=1)
        return policy_class.deterministic_member(int(np.argmin(worst)), mdp.horizon)
    if method == "lp":
        occ = _minimax_lp(mdp, policy_class.allowed, reward_class, targets)
        return _policy_from_occupancy(occ, policy_class.base_policy(mdp.horizon))
    raise ConfigurationError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# coverage and behavioral cloning


def coverage_coefficient(numerator: OccupancyTensor, denominator: OccupancyTensor,
                         per_step: bool = False) -> float:
    """Sup-norm density ratio ``max num/den`` over the numerator's support; inf if uncovered."""
    num = numerator.per_step if per_step else numerator.averaged
    den = denominator.per_step if per_step else denominator.averaged
    if num.shape != den.shape:
        raise ConfigurationError("occupancy tensors have different shapes")
    support = num > 0
    if not support.any():
        return 0.0
    if np.any(den[support] <= 0):
        return math.inf
    return float(np.max(num[support] / den[support]))


def behavioral_cloning(demos: DemoDataset, policy_class: PolicyClass) -> NonstationaryPolicy:
    """Per-``(h, s)`` most frequent allowed demonstrated action.

    Ties go to the lowest action index; states without an allowed demonstrated
    action fall back to uniform over the allowed set. Explicit classes return
    the member with the highest demonstrated-action likelihood mass.
    """
    if len(demos) == 0:
        raise ConfigurationError("behavioral cloning needs a nonempty dataset")
    counts = demos.pair_counts()
    H, S, A = counts.shape
    if policy_class.kind == "explicit":
        scores = [float(np.sum(counts * m.probs)) for m in policy_class.members]
        return policy_class.members[int(np.argmax(scores))]
    allowed = policy_class.allowed
    masked = np.where(allowed[None], counts, -1.0)
    best = masked.argmax(axis=-1)
    seen = masked.max(axis=-1) > 0
    probs = np.where(seen[..., None], np.eye(A)[best],
                     (allowed / allowed.sum(axis=1, keepdims=True))[None])
    return NonstationaryPolicy(probs)


def optimal_class_value(mdp: TabularMdp, policy_class: PolicyClass, reward) -> float:
    """``max_{pi in class} J(pi, r)`` for masked classes by backward induction."""
    acts = _greedy_actions(mdp, policy_class.allowed,
                           check_reward(reward, mdp.num_states, mdp.num_actions), 1)
    return policy_value(mdp, NonstationaryPolicy.from_actions(acts, mdp.num_actions), reward)
