"""Numerical checks of the sample-complexity inequalities on concrete instances.

Each check returns a :class:`BoundCheck` whose rows hold the realized quantity,
the right-hand side and its components, so failures can be audited.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classes import ResetDistribution, coverage_coefficient, reward_agnostic_completeness
from .demos import STREAM_EXPERT, STREAM_OFFLINE, make_rng, sample_demos
from .guitar import guitar_run, reset_from_demos, reset_from_occupancy, reset_mixture
from .instances import optimal_policy, random_mdp, tremble_policy
from .mdp import NonstationaryPolicy, TabularMdp, compute_occupancy
from .psdp import PsdpConfig
from .stile import min_l1_distance, misspecified_bound, realizable_bound, stile_select

DEFAULT_DELTA = 0.1


@dataclass
class BoundCheck:
    name: str
    rows: list[dict] = field(default_factory=list)
    required_fraction: float = 1.0

    @property
    def holds_fraction(self) -> float:
        if not self.rows:
            return 0.0
        return float(np.mean([row["holds"] for row in self.rows]))

    @property
    def passed(self) -> bool:
        return self.holds_fraction >= self.required_fraction

    def to_dict(self) -> dict:
        return {"name": self.name, "holds_fraction": self.holds_fraction,
                "required_fraction": self.required_fraction, "passed": self.passed,
                "rows": self.rows}


def _j(mdp: TabularMdp, occ) -> float:
    return float(np.einsum("hsa,sa->", occ.per_step, mdp.reward))


def completeness_upper(mdp, policy_class, reward_class, rho) -> tuple[float, bool]:
    """Exact completeness error when enumerable, else the certified upper bound."""
    rep = reward_agnostic_completeness(mdp, policy_class, reward_class, rho)
    return (rep.epsilon_pi if rep.exact else rep.upper_bound), rep.exact


# --------------------------------------------------------------------------
# infinite expert data


def guitar_exact_bound(horizon: int, epsilon_pi: float, epsilon: float, num_rewards: int,
                       iterations: int) -> dict:
    terms = {"misspecification": horizon * epsilon_pi,
             "optimization": horizon**2 * epsilon,
             "regret": horizon * math.sqrt(math.log(num_rewards) / iterations)}
    terms["bound"] = sum(terms.values())
    return terms


def guitar_exact_check(scenario, epsilons=(0.0, 0.05), iterations=(16, 64, 256),
                       off_support: str = "base", tol: float = 1e-9) -> BoundCheck:
    """Exact-expert mode with resets on the expert's state distribution.

    The realized gap is that of the uniform mixture of all iterates.
    """
    mdp = scenario.mdp
    occ_e = compute_occupancy(mdp, scenario.expert)
    rho = reset_from_occupancy(mdp, scenario.expert, "expert_occupancy")
    eps_pi, exact = completeness_upper(mdp, scenario.policy_class, scenario.reward_class, rho)
    check = BoundCheck("guitar-exact")
    for eps in epsilons:
        cfg = PsdpConfig(epsilon=eps, adversarial=eps > 0, off_support=off_support)
        for n in iterations:
            res = guitar_run(mdp, scenario.policy_class, scenario.reward_class, rho, n,
                             expert_occupancy=occ_e, psdp_config=cfg)
            terms = guitar_exact_bound(mdp.horizon, eps_pi, eps, len(scenario.reward_class), n)
            check.rows.append({"scenario": scenario.id, "epsilon": eps, "iterations": n,
                               "gap": res.mixture_gap, "epsilon_pi": eps_pi,
                               "epsilon_pi_exact": exact, **terms,
                               "holds": res.mixture_gap <= terms["bound"] + tol})
    return check


# --------------------------------------------------------------------------
# finite expert data with offline data


def guitar_finite_bound(horizon: int, epsilon_mix: float, log_num_policies: float,
                        num_rewards: int, num_expert: int, num_offline: int,
                        coverage: float, iterations: int, delta: float = DEFAULT_DELTA) -> dict:
    c_pi_r = log_num_policies + math.log(num_rewards / delta)
    c_r = math.log(num_rewards / delta)
    expert_only = epsilon_mix * (1.0 + math.sqrt(c_pi_r / num_expert))
    if math.isinf(coverage):
        with_offline = math.inf
    else:
        with_offline = coverage * epsilon_mix * (1.0 + math.sqrt(c_pi_r / (num_expert + num_offline)))
    terms = {"misspecification": horizon * min(expert_only, with_offline),
             "statistical": horizon * math.sqrt(c_r / num_expert),
             "regret": horizon * math.sqrt(math.log(num_rewards) / iterations)}
    terms["bound"] = sum(terms.values())
    return terms


def population_mixture(scenario, num_expert: int, num_offline: int,
                       tremble: float | None = None) -> ResetDistribution:
    """Per-step ``(N d^E_h + M d^B_h) / (N + M)``, dropping offline mass past its truncation."""
    mdp = scenario.mdp
    d_e = compute_occupancy(mdp, scenario.expert).state_per_step
    if num_offline == 0 or scenario.offline_policy is None:
        return ResetDistribution(d_e, "expert_occupancy")
    p = scenario.offline_tremble if tremble is None else tremble
    d_b = compute_occupancy(mdp, tremble_policy(scenario.offline_policy, p)).state_per_step
    w_b = np.full(mdp.horizon, float(num_offline))
    if scenario.offline_max_steps is not None:
        w_b[scenario.offline_max_steps:] = 0.0
    w_e = float(num_expert)
    rho = (w_e * d_e + w_b[:, None] * d_b) / (w_e + w_b)[:, None]
    return ResetDistribution(rho, "population_mixture")


def guitar_finite_check(scenario, num_expert: int, num_offline: int, trials: int = 200,
                        delta: float = DEFAULT_DELTA, iterations: int = 64, seed: int = 0,
                        off_support: str = "base", margin: float = 0.05) -> BoundCheck:
    """Repeated trials with fresh demo draws; resets on the empirical mixture."""
    mdp = scenario.mdp
    occ_e = compute_occupancy(mdp, scenario.expert)
    rho_pop = population_mixture(scenario, num_expert, num_offline)
    eps_mix, exact = completeness_upper(mdp, scenario.policy_class, scenario.reward_class, rho_pop)
    tremble = scenario.offline_tremble
    behavior = tremble_policy(scenario.offline_policy, tremble)
    c_b = coverage_coefficient(compute_occupancy(mdp, scenario.pistar()),
                               compute_occupancy(mdp, behavior))
    terms = guitar_finite_bound(mdp.horizon, eps_mix, scenario.policy_class.log_size(mdp.horizon),
                                len(scenario.reward_class), num_expert, num_offline, c_b,
                                iterations, delta)
    cfg = PsdpConfig(off_support=off_support)
    check = BoundCheck("guitar-finite", required_fraction=1.0 - delta - margin)
    for t in range(trials):
        demos = sample_demos(mdp, scenario.expert, num_expert,
                             seed=make_rng(seed, t, STREAM_EXPERT))
        fill = scenario.reset_fill
        if num_offline > 0:
            offline = sample_demos(mdp, scenario.offline_policy, num_offline, tremble=tremble,
                                   seed=make_rng(seed, t, STREAM_OFFLINE), source="offline",
                                   max_steps=scenario.offline_max_steps)
            rho = reset_mixture(demos, offline, fill)
        else:
            rho = reset_from_demos(demos, fill)
        res = guitar_run(mdp, scenario.policy_class, scenario.reward_class, rho, iterations,
                         expert_demos=demos, reference_occupancy=occ_e, psdp_config=cfg)
        check.rows.append({"scenario": scenario.id, "trial": t, "num_expert": num_expert,
                           "num_offline": num_offline, "gap": res.mixture_gap,
                           "epsilon_mix": eps_mix, "epsilon_mix_exact": exact,
                           "coverage": c_b, **terms, "holds": res.mixture_gap <= terms["bound"]})
    return check


# --------------------------------------------------------------------------
# STILE


STILE_MDP_SEED = 4
STILE_ALPHA_RANGE = (0.3, 3e-3)


def stile_instance(mdp_seed: int = STILE_MDP_SEED, num_states: int = 4, num_actions: int = 2,
                   horizon: int = 4) -> tuple[TabularMdp, NonstationaryPolicy, NonstationaryPolicy]:
    """Random MDP, its optimal policy (the expert) and the optimal policy for ``1 - r*``."""
    mdp = random_mdp(make_rng(mdp_seed), num_states, num_actions, horizon)
    return mdp, optimal_policy(mdp), optimal_policy(mdp, reward=1.0 - mdp.reward)


def stile_family(expert: NonstationaryPolicy, alternative: NonstationaryPolicy, size: int,
                 include_expert: bool = True) -> list[NonstationaryPolicy]:
    """``expert`` followed by per-state mixtures ``(1 - a) expert + a alternative`` with
    log-spaced ``a``; without the expert all ``size`` members are mixtures."""
    count = size - 1 if include_expert else size
    alphas = np.geomspace(*STILE_ALPHA_RANGE, count)
    mixes = [NonstationaryPolicy((1 - a) * expert.probs + a * alternative.probs) for a in alphas]
    return ([expert] if include_expert else []) + mixes


def _stile_trials(mdp, expert, policies, sizes_n, trials, seed, tag):
    occs = [compute_occupancy(mdp, p) for p in policies]
    values = np.array([_j(mdp, o) for o in occs])
    j_e = _j(mdp, compute_occupancy(mdp, expert))
    for n in sizes_n:
        for t in range(trials):
            demos = sample_demos(mdp, expert, n, seed=make_rng(seed, tag, n, t))
            res = stile_select(mdp, policies, demos, occs)
            yield n, t, j_e - values[res.selected_index], res.num_witnesses


def _stile_setup(scenario):
    if scenario is None:
        return stile_instance()
    mdp = scenario.mdp
    return mdp, scenario.expert, optimal_policy(mdp, reward=1.0 - mdp.reward)


def stile_realizable_check(scenario=None, sizes=(4, 16), sample_sizes=(100, 1000, 10000), trials: int = 200,
                           delta: float = DEFAULT_DELTA, seed: int = 0,
                           margin: float = 0.05) -> tuple[BoundCheck, dict]:
    """Bound check plus the log-log slope of the mean gap against N, per family size.

    Candidates are the scenario's expert and mixtures toward the optimal policy
    for ``1 - r*``; without a scenario a fixed random 4-state MDP is used.
    """
    mdp, expert, alt = _stile_setup(scenario)
    check = BoundCheck("stile-realizable", required_fraction=1.0 - delta - margin)
    slopes = {}
    for size in sizes:
        policies = stile_family(expert, alt, size)
        means = {}
        for n, t, gap, _ in _stile_trials(mdp, expert, policies, sample_sizes, trials, seed, size):
            bound = realizable_bound(mdp.horizon, size, n, delta)
            check.rows.append({"num_policies": size, "num_samples": n, "trial": t, "gap": gap,
                               "bound": bound, "holds": gap <= bound})
            means.setdefault(n, []).append(gap)
        mean_gaps = [float(np.mean(means[n])) for n in sample_sizes]
        slopes[size] = {"mean_gaps": mean_gaps, "slope": log_log_slope(sample_sizes, mean_gaps)}
    return check, slopes


def stile_misspecified_check(scenario=None, sizes=(4, 16), sample_sizes=(100, 1000, 10000), trials: int = 200,
                             delta: float = DEFAULT_DELTA, seed: int = 1,
                             margin: float = 0.05) -> BoundCheck:
    mdp, expert, alt = _stile_setup(scenario)
    check = BoundCheck("stile-misspecified", required_fraction=1.0 - delta - margin)
    for size in sizes:
        policies = stile_family(expert, alt, size, include_expert=False)
        min_l1 = min_l1_distance(mdp, policies, expert)
        for n, t, gap, nf in _stile_trials(mdp, expert, policies, sample_sizes, trials, seed, size):
            bound = misspecified_bound(mdp.horizon, min_l1, nf, n, delta)
            check.rows.append({"num_policies": size, "num_samples": n, "trial": t, "gap": gap,
                               "min_l1": min_l1, "num_witnesses": nf, "bound": bound,
                               "holds": gap <= bound})
    return check


def log_log_slope(xs, ys) -> float:
    ys = np.asarray(ys, dtype=float)
    if np.any(ys <= 0):
        return math.nan
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(ys), 1)[0])


# --------------------------------------------------------------------------
# helpers shared with the harness


def hoeffding_radius(num_rewards: int, num_samples: int, delta: float = DEFAULT_DELTA) -> float:
    """Uniform deviation of ``num_rewards`` sample means of [0,1] variables."""
    return math.sqrt(math.log(2 * num_rewards / delta) / (2 * num_samples))
