"""Built-in scenarios: two misspecified mazes, coverage detours and random masked MDPs.

Scenario ids:

* ``block_maze``: 5x5 ring maze; the learner may not enter the top-left cell.
* ``time_constraint_maze``: U-maze whose ordinary moves time out after 10 steps.
* ``coverage/<k>`` (k = 0..9): two-route detour; offline data covers the detour.
* ``coverage/uncovered``: same layout, offline data never leaves the start.
* ``random_masked/<seed>``: small random MDP with a random action mask.
* ``random_full/<seed>``: the same MDP with every action allowed (realizable).
"""
from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field

import numpy as np

from ..classes import PolicyClass, RewardClass, best_realizable_policy, worst_case_gap
from ..demos import make_rng
from ..instances import optimal_policy, random_mask, random_mdp
from ..mdp import ConfigurationError, NonstationaryPolicy, TabularMdp, compute_occupancy

MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right
MOVE_NAMES = ("up", "down", "left", "right")
NUM_COVERAGE = 10
NUM_RANDOM = 50


@dataclass(eq=False)
class Scenario:
    id: str
    mdp: TabularMdp
    expert: NonstationaryPolicy
    policy_class: PolicyClass
    reward_class: RewardClass
    offline_policy: NonstationaryPolicy | None = None
    notes: str = ""
    value_scale: float = 1.0  # divide J(., r*) by this to normalize
    state_names: tuple[str, ...] = ()
    reset_fill: np.ndarray | None = None  # state distribution for steps without samples
    offline_max_steps: int | None = None
    offline_tremble: float = 0.0
    documented: dict = field(default_factory=dict)
    _pistar: NonstationaryPolicy | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.expert.probs.shape != self.mdp.shape:
            raise ConfigurationError(f"{self.id}: expert does not match the MDP")
        self.policy_class.check(self.mdp)
        if self.reward_class.index_of(self.mdp.reward) is None:
            raise ConfigurationError(f"{self.id}: r* is not in the reward class")

    @property
    def rstar_index(self) -> int:
        return self.reward_class.index_of(self.mdp.reward)

    def pistar(self) -> NonstationaryPolicy:
        """Optimal realizable policy (computed once, then cached)."""
        if self._pistar is None:
            self._pistar = best_realizable_policy(self.mdp, self.policy_class,
                                                  self.reward_class, self.expert)
        return self._pistar

    def normalized_value(self, policy: NonstationaryPolicy) -> float:
        occ = compute_occupancy(self.mdp, policy)
        return float(np.einsum("hsa,sa->", occ.per_step, self.mdp.reward)) / self.value_scale

    def summary(self) -> dict:
        H, S, A = self.mdp.shape
        doc = {
            "id": self.id, "notes": self.notes, "horizon": H, "num_states": S,
            "num_actions": A, "policy_class": self.policy_class.kind,
            "reward_names": list(self.reward_class.names),
            "value_scale": self.value_scale,
            "has_offline_policy": self.offline_policy is not None,
            "offline_tremble": self.offline_tremble,
            "offline_max_steps": self.offline_max_steps,
            "documented": self.documented,
        }
        if self.state_names:
            doc["state_names"] = list(self.state_names)
        return doc


def _stationary(actions, horizon: int, num_actions: int) -> NonstationaryPolicy:
    return NonstationaryPolicy.from_actions(np.tile(np.asarray(actions), (horizon, 1)), num_actions)


# --------------------------------------------------------------------------
# block obstruction


def build_block_maze() -> Scenario:
    """Ring of eight open cells around a wall; start R=(2,1), goal G=(2,3).

    The expert goes over the top through (1,1); the learner's mask forbids
    every move into (1,1), so it must use the equally long bottom route. r*
    pays 1 per step at G and 8/9 at (1,1); with H = 12 the expert collects
    80/9 and the best learner 8, i.e. 1.0 and 0.9 after dividing by 80/9.
    """
    cells = [(1, 1), (1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2), (3, 3)]
    index = {c: i for i, c in enumerate(cells)}
    S, A, H = len(cells), 4, 12
    P = np.zeros((S, A, S))
    for (r, c), s in index.items():
        for a, (dr, dc) in enumerate(MOVES):
            P[s, a, index.get((r + dr, c + dc), s)] = 1.0
    start, goal, corner = index[(2, 1)], index[(2, 3)], index[(1, 1)]
    rstar = np.zeros((S, A))
    rstar[goal] = 1.0
    rstar[corner] = 8.0 / 9.0
    goal_ind = np.zeros((S, A))
    goal_ind[goal] = 1.0
    xpos = np.repeat(np.array([(c - 1) / 2.0 for _, c in cells])[:, None], A, axis=1)
    allowed = np.ones((S, A), bool)
    allowed[start, 0] = False  # up from R
    allowed[index[(1, 2)], 2] = False  # left from (1,2)
    mu = np.zeros(S)
    mu[start] = 1.0
    mdp = TabularMdp.time_homogeneous(P, rstar, mu, H)
    up, down, left, right = range(4)
    expert = {(1, 1): right, (1, 2): right, (1, 3): down, (2, 1): up, (2, 3): left,
              (3, 1): right, (3, 2): right, (3, 3): up}
    bottom = dict(expert)
    bottom.update({(2, 1): down, (1, 1): right})
    scenario = Scenario(
        id="block_maze", mdp=mdp,
        expert=_stationary([expert[c] for c in cells], H, A),
        policy_class=PolicyClass.masked(allowed),
        reward_class=RewardClass(np.stack([rstar, goal_ind, xpos]), ("rstar", "goal", "x_position")),
        offline_policy=_stationary([bottom[c] for c in cells], H, A),
        notes="expert route over the top is blocked for the learner",
        value_scale=80.0 / 9.0,
        state_names=tuple(f"({r},{c})" for r, c in cells),
        documented={"J_expert_normalized": 1.0, "J_pistar_normalized": 0.9},
    )
    # the bottom route holding at G is a minimizer of the worst-case gap
    scenario._pistar = scenario.offline_policy
    return scenario


# --------------------------------------------------------------------------
# time constraint


TIME_LIMIT = 10


def build_time_constraint_maze() -> Scenario:
    """U-maze: a 10-cell first hallway, a connector and a 7-cell second hallway.

    Actions 0-3 are ordinary moves and 4-7 the same moves without the time
    limit. From step 10 on, ordinary moves send every non-goal state to an
    absorbing TIMEOUT state. The learner may only use ordinary moves; the
    expert uses the unlimited ones and reaches the goal at step 17 (H = 20).
    """
    path = [(0, c) for c in range(10)] + [(1, 9)] + [(2, c) for c in range(9, 2, -1)]
    cells = sorted(path)
    index = {c: i for i, c in enumerate(cells)}
    timeout = len(cells)
    S, A, H = len(cells) + 1, 8, 20
    goal = index[(2, 3)]
    base = np.zeros((S, 4, S))
    for (r, c), s in index.items():
        for a, (dr, dc) in enumerate(MOVES):
            base[s, a, index.get((r + dr, c + dc), s)] = 1.0
    base[goal] = 0.0
    base[goal, :, goal] = 1.0
    base[timeout, :, timeout] = 1.0
    P = np.zeros((H, S, A, S))
    for h in range(H):
        P[h, :, :4] = base
        P[h, :, 4:] = base
        if h >= TIME_LIMIT:
            for s in range(S):
                if s not in (goal, timeout):
                    P[h, s, :4] = 0.0
                    P[h, s, :4, timeout] = 1.0
    rstar = np.zeros((S, A))
    rstar[goal] = 1.0
    progress = np.zeros((S, A))
    for k, cell in enumerate(path):
        progress[index[cell]] = k / (len(path) - 1)
    allowed = np.zeros((S, A), bool)
    allowed[:, :4] = True
    mu = np.zeros(S)
    mu[index[(0, 0)]] = 1.0
    mdp = TabularMdp(P, rstar, mu)
    up, down, left, right = range(4)
    step = {}
    for cell, nxt in zip(path, path[1:]):
        d = (nxt[0] - cell[0], nxt[1] - cell[1])
        step[cell] = MOVES.index(d)
    step[(2, 3)] = left
    moves = np.zeros(S, dtype=np.int64)
    for cell, a in step.items():
        moves[index[cell]] = a
    fill = np.zeros(S)
    fill[timeout] = 1.0
    return Scenario(
        id="time_constraint_maze", mdp=mdp,
        expert=_stationary(moves + 4, H, A),
        policy_class=PolicyClass.masked(allowed),
        reward_class=RewardClass(np.stack([rstar, progress]), ("rstar", "progress")),
        offline_policy=_stationary(moves, H, A),
        notes="ordinary moves time out after 10 steps; offline data stops at the limit",
        value_scale=float(H - (len(path) - 1)),
        state_names=tuple(f"({r},{c})" for r, c in cells) + ("TIMEOUT",),
        reset_fill=fill, offline_max_steps=TIME_LIMIT,
        documented={"J_expert_normalized": 1.0, "J_pistar_normalized": 0.0},
    )


# --------------------------------------------------------------------------
# coverage detours


def build_coverage_detour(k: int | str) -> Scenario:
    """Start state with two routes to an absorbing goal.

    Route A (expert, blocked for the learner at the start) is shorter and pays
    a small bonus; route B is the realizable detour. Every route cell has one
    advancing action, one that stays and one that returns to the start, in a
    cell-specific random order; moves slip (stay put) with a random
    probability. ``coverage/uncovered`` uses an offline policy that never
    leaves the start.
    """
    uncovered = k == "uncovered"
    rng = make_rng(1000 + (NUM_COVERAGE if uncovered else int(k)))
    len_a = int(rng.integers(2, 4))
    len_b = len_a + int(rng.integers(2, 4))
    slip = float(rng.uniform(0.0, 0.15))
    bonus = float(rng.uniform(0.1, 0.5))
    S, A = len_a + len_b + 2, 3
    H = len_b + 2 + int(rng.integers(2, 5))
    start, goal = 0, S - 1
    route_a = list(range(1, 1 + len_a))
    route_b = list(range(1 + len_a, 1 + len_a + len_b))
    P = np.zeros((S, A, S))
    advance = np.zeros(S, dtype=np.int64)
    roles = rng.permutation(A)  # start: (to A, to B, stay)
    P[start, roles[0], route_a[0]] = 1.0
    P[start, roles[1], route_b[0]] = 1.0
    P[start, roles[2], start] = 1.0
    for route in (route_a, route_b):
        for i, s in enumerate(route):
            nxt = route[i + 1] if i + 1 < len(route) else goal
            adv, stay, back = rng.permutation(A)
            advance[s] = adv
            P[s, adv, nxt] = 1.0
            P[s, stay, s] = 1.0
            P[s, back, start] = 1.0
    P[goal, :, goal] = 1.0
    # slip: a moving action fails and the agent stays put
    for s in range(S - 1):
        for a in range(A):
            if P[s, a, s] < 1.0:
                P[s, a] *= 1.0 - slip
                P[s, a, s] += slip
    rstar = np.zeros((S, A))
    rstar[goal] = 1.0
    rstar[route_a] = bonus
    goal_ind = np.zeros((S, A))
    goal_ind[goal] = 1.0
    start_ind = np.zeros((S, A))
    start_ind[start] = 1.0
    allowed = np.ones((S, A), bool)
    allowed[start, roles[0]] = False
    mu = np.zeros(S)
    mu[start] = 1.0
    mdp = TabularMdp.time_homogeneous(P, rstar, mu, H)
    expert_actions = advance.copy()
    expert_actions[start] = roles[0]
    detour_actions = advance.copy()
    detour_actions[start] = roles[1]
    offline_actions = detour_actions.copy()
    if uncovered:
        offline_actions[start] = roles[2]
    name = "coverage/uncovered" if uncovered else f"coverage/{int(k)}"
    return Scenario(
        id=name, mdp=mdp, expert=_stationary(expert_actions, H, A),
        policy_class=PolicyClass.masked(allowed),
        reward_class=RewardClass(np.stack([rstar, goal_ind, start_ind]), ("rstar", "goal", "start")),
        offline_policy=_stationary(offline_actions, H, A),
        notes=(f"route A length {len_a}, detour length {len_b}, slip {slip:.3f}, bonus {bonus:.3f}"
               + ("; offline data never leaves the start" if uncovered else "")),
        value_scale=1.0, offline_tremble=0.0 if uncovered else 0.1,
    )


# --------------------------------------------------------------------------
# random masked MDPs


def build_random_masked(seed: int, full: bool = False) -> Scenario:
    """Random MDP (S <= 4, A <= 3, H <= 4) with a random mask; the expert is
    the unmasked optimum for r* and the reward class holds r* plus 1-2 random
    rewards. The offline policy is the optimal realizable policy. With
    ``full`` every action is allowed, so the expert is realizable."""
    rng = make_rng(2000 + int(seed))
    S = int(rng.integers(3, 5))
    A = int(rng.integers(2, 4))
    H = int(rng.integers(3, 5))
    K = int(rng.integers(2, 4))
    mdp = random_mdp(rng, S, A, H)
    mask = random_mask(rng, S, A)
    rewards = np.concatenate([mdp.reward[None], rng.random((K - 1, S, A))])
    if full:
        mask = np.ones_like(mask)
    prefix = "random_full" if full else "random_masked"
    scenario = Scenario(
        id=f"{prefix}/{int(seed)}", mdp=mdp, expert=optimal_policy(mdp),
        policy_class=PolicyClass.masked(mask),
        reward_class=RewardClass(rewards, ("rstar",) + tuple(f"rand{i}" for i in range(1, K))),
        notes=f"random S={S} A={A} H={H} K={K}", offline_tremble=0.1,
    )
    scenario.offline_policy = scenario.pistar()
    return scenario


# --------------------------------------------------------------------------
# registry


def list_scenarios() -> list[str]:
    return (["block_maze", "time_constraint_maze"]
            + [f"coverage/{k}" for k in range(NUM_COVERAGE)] + ["coverage/uncovered"]
            + [f"random_masked/{k}" for k in range(NUM_RANDOM)]
            + [f"random_full/{k}" for k in range(NUM_RANDOM)])


@functools.lru_cache(maxsize=128)
def get_scenario(scenario_id: str) -> Scenario:
    """Build (and memoize) a scenario by id; unknown ids raise ``ConfigurationError``."""
    if scenario_id == "block_maze":
        return build_block_maze()
    if scenario_id == "time_constraint_maze":
        return build_time_constraint_maze()
    m = re.fullmatch(r"coverage/(\d+|uncovered)", scenario_id)
    if m:
        return build_coverage_detour(m.group(1) if m.group(1) == "uncovered" else int(m.group(1)))
    m = re.fullmatch(r"random_(masked|full)/(\d+)", scenario_id)
    if m:
        return build_random_masked(int(m.group(2)), full=m.group(1) == "full")
    raise ConfigurationError(f"unknown scenario {scenario_id!r}")


def check_pistar(scenario: Scenario, atol: float = 1e-9) -> bool:
    """True when the cached optimal realizable policy matches a fresh solve's worst-case gap."""
    fresh = best_realizable_policy(scenario.mdp, scenario.policy_class, scenario.reward_class,
                                   scenario.expert)
    a = worst_case_gap(scenario.mdp, scenario.pistar(), scenario.reward_class, scenario.expert)[0]
    b = worst_case_gap(scenario.mdp, fresh, scenario.reward_class, scenario.expert)[0]
    return abs(a - b) <= atol
