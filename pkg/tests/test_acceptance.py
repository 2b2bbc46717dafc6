"""End-to-end acceptance criteria, each at its stated tolerance and time budget."""
import math
import time

import numpy as np
from resetirl.bounds import (guitar_exact_check, guitar_finite_check, stile_misspecified_check,
                             stile_realizable_check)
from resetirl.classes import PolicyClass, ResetDistribution, coverage_coefficient
from resetirl.demos import make_rng
from resetirl.guitar import average_regret, hedge_weights
from resetirl.harness.experiment import ExperimentConfig, run_experiment, run_seed
from resetirl.harness.scenarios import check_pistar, get_scenario
from resetirl.instances import optimal_value, random_mdp, random_policy, tremble_policy
from resetirl.mdp import compute_occupancy, performance_difference, policy_value
from resetirl.psdp import PsdpConfig, psdp_certificate, psdp_solve


def test_criterion_1_performance_difference(record_criterion):
    rng = make_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        S, A, H = rng.integers(1, 7), rng.integers(1, 4), rng.integers(1, 6)
        mdp = random_mdp(rng, S, A, H)
        reward = rng.random((S, A))
        pa = random_policy(rng, H, S, A)
        pb = random_policy(rng, H, S, A)
        lhs = policy_value(mdp, pa, reward) - policy_value(mdp, pb, reward)
        worst = max(worst, abs(performance_difference(mdp, pa, pb, reward) - lhs))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10
    record_criterion(1, ok, f"max |error|={worst:.2e} time={elapsed:.1f}s")
    assert ok


def test_criterion_2_psdp_optimality(record_criterion):
    rng = make_rng(102)
    start = time.perf_counter()
    worst_value, worst_cert = 0.0, -math.inf
    for _ in range(200):
        S, A, H = rng.integers(1, 7), rng.integers(1, 4), rng.integers(1, 6)
        mdp = random_mdp(rng, S, A, H)
        rho = rng.random((H, S)) + 0.05
        reset = ResetDistribution(rho / rho.sum(axis=1, keepdims=True))
        cls = PolicyClass.full(S, A)
        policy = psdp_solve(mdp, cls, mdp.reward, PsdpConfig(reset=reset))
        worst_value = max(worst_value, abs(policy_value(mdp, policy) - optimal_value(mdp)))
        cert = psdp_certificate(mdp, cls, policy, mdp.reward, reset)
        worst_cert = max(worst_cert, float(cert.max()))
    elapsed = time.perf_counter() - start
    ok = worst_value <= 1e-10 and worst_cert <= 1e-10 and elapsed < 30
    record_criterion(2, ok, f"max value error={worst_value:.2e} max certificate={worst_cert:.2e} "
                            f"time={elapsed:.1f}s")
    assert ok


def _adversarial_gains(kind: int, rng, K: int, n: int, eta: float) -> np.ndarray:
    """Gains in [-1, 1]; kind 3 adapts to the learner's current weights."""
    if kind == 0:
        return rng.choice([-1.0, 1.0], size=(n, K))
    if kind == 1:
        means = rng.uniform(-0.2, 0.2, K)
        return np.clip(means + rng.uniform(-0.8, 0.8, (n, K)), -1, 1)
    if kind == 2:
        gains = -np.ones((n, K))
        gains[: n // 2, 0] = 1.0
        gains[n // 2:, K - 1] = 1.0
        return gains
    gains = np.empty((n, K))
    cumulative = np.zeros(K)
    for i in range(n):
        w = hedge_weights(cumulative, eta)
        gains[i] = -1.0
        gains[i, int(np.argmin(w))] = 1.0
        cumulative += gains[i]
    return gains


def test_criterion_3_omd_regret(record_criterion):
    rng = make_rng(103)
    start = time.perf_counter()
    worst_excess = -math.inf
    for K in (2, 8, 32):
        for n in (10, 100, 1000):
            eta = math.sqrt(2 * math.log(K) / n)
            for seq in range(100):
                gains = _adversarial_gains(seq % 4, rng, K, n, eta)
                cumulative = np.vstack([np.zeros(K), np.cumsum(gains, axis=0)[:-1]])
                z = eta * cumulative
                w = np.exp(z - z.max(axis=1, keepdims=True))
                w /= w.sum(axis=1, keepdims=True)
                regret = average_regret(gains, w)[-1]
                worst_excess = max(worst_excess, regret - math.sqrt(2 * math.log(K) / n))
    elapsed = time.perf_counter() - start
    ok = worst_excess <= 1e-9 and elapsed < 10
    record_criterion(3, ok, f"max(regret - bound)={worst_excess:.3e} time={elapsed:.1f}s")
    assert ok


def test_criterion_4_guitar_exact_bound(record_criterion):
    start = time.perf_counter()
    rows = []
    for k in range(50):
        rows += guitar_exact_check(get_scenario(f"random_masked/{k}")).rows
    elapsed = time.perf_counter() - start
    held = sum(r["holds"] for r in rows)
    all_exact = all(r["epsilon_pi_exact"] for r in rows)
    slack = max(r["gap"] - r["bound"] for r in rows)
    ok = held == len(rows) and all_exact and elapsed < 300
    record_criterion(4, ok, f"{held}/{len(rows)} runs hold, exact eps_pi={all_exact}, "
                            f"max(gap - bound)={slack:.3f} time={elapsed:.1f}s")
    assert ok


def test_criterion_5_guitar_finite_bound(record_criterion):
    start = time.perf_counter()
    fractions = {}
    for k in range(5):
        scenario = get_scenario(f"random_masked/{k}")
        for N in (50, 500):
            for M in (0, 500):
                check = guitar_finite_check(scenario, N, M, trials=200, delta=0.1)
                fractions[(k, N, M)] = check.holds_fraction
    elapsed = time.perf_counter() - start
    worst = min(fractions.values())
    ok = worst >= 0.85 and elapsed < 600
    record_criterion(5, ok, f"min hold fraction={worst:.3f} over {len(fractions)} configurations "
                            f"time={elapsed:.1f}s")
    assert ok


def test_criterion_6_stile_realizable(record_criterion):
    start = time.perf_counter()
    check, slopes = stile_realizable_check(trials=200, delta=0.1)
    elapsed = time.perf_counter() - start
    slope_ok = all(abs(v["slope"] + 0.5) <= 0.15 for v in slopes.values())
    ok = check.holds_fraction >= 0.85 and slope_ok and elapsed < 300
    slope_text = ", ".join(f"|Pi|={k}: {v['slope']:.3f}" for k, v in slopes.items())
    record_criterion(6, ok, f"hold fraction={check.holds_fraction:.3f} slopes [{slope_text}] "
                            f"time={elapsed:.1f}s")
    assert ok


def test_criterion_7_stile_misspecified(record_criterion):
    start = time.perf_counter()
    check = stile_misspecified_check(trials=200, delta=0.1)
    elapsed = time.perf_counter() - start
    ok = check.holds_fraction >= 0.85 and elapsed < 300
    record_criterion(7, ok, f"hold fraction={check.holds_fraction:.3f} time={elapsed:.1f}s")
    assert ok


def _mean_final_gap(scenario, algorithm, reset, seeds=range(10), **kwargs) -> float:
    cfg = ExperimentConfig(scenario.id, algorithm, reset=reset, seeds=list(seeds), **kwargs)
    return float(np.mean([run_seed(scenario, cfg, s)["final_gap"] for s in cfg.seeds]))


def test_criterion_8_block_maze(record_criterion):
    start = time.perf_counter()
    scenario = get_scenario("block_maze")
    j_e = scenario.normalized_value(scenario.expert)
    j_star = scenario.normalized_value(scenario.pistar())
    values_ok = abs(j_e - 1.0) <= 1e-9 and abs(j_star - 0.9) <= 1e-9 and check_pistar(scenario)
    guitar = _mean_final_gap(scenario, "GUITAR", "occupancy:pistar")
    filt = _mean_final_gap(scenario, "FILTER", "expert_demos")
    mm = _mean_final_gap(scenario, "MM", "start_state")
    elapsed = time.perf_counter() - start
    ok = values_ok and guitar < filt < mm and elapsed < 600
    record_criterion(8, ok, f"J_E={_fmt(j_e)} J*={_fmt(j_star)} gaps GUITAR={guitar:.3f} "
                            f"FILTER={filt:.3f} MM={mm:.3f} time={elapsed:.1f}s")
    assert ok


def _fmt(x: float) -> str:
    return repr(float(x))


def _coverage_pair(scenario):
    mdp = scenario.mdp
    occ_star = compute_occupancy(mdp, scenario.pistar())
    behavior = tremble_policy(scenario.offline_policy, scenario.offline_tremble)
    return (coverage_coefficient(occ_star, compute_occupancy(mdp, behavior)),
            coverage_coefficient(occ_star, compute_occupancy(mdp, scenario.expert)))


def test_criterion_9_offline_coverage(record_criterion):
    start = time.perf_counter()
    wins, details = 0, []
    preconditions = True
    for k in range(10):
        scenario = get_scenario(f"coverage/{k}")
        c_b, c_e = _coverage_pair(scenario)
        preconditions &= math.isfinite(c_b) and math.isinf(c_e)
        common = dict(num_expert=100, num_offline=500)
        g_mix = _mean_final_gap(scenario, "GUITAR", "mixture", **common)
        g_exp = _mean_final_gap(scenario, "GUITAR", "expert_demos", **common)
        wins += g_mix < g_exp
        details.append(f"{k}:{g_mix:.2f}<{g_exp:.2f}")
    uncovered = get_scenario("coverage/uncovered")
    c_b, _ = _coverage_pair(uncovered)
    common = dict(num_expert=100, num_offline=500)
    u_mix = _mean_final_gap(uncovered, "GUITAR", "mixture", **common)
    u_exp = _mean_final_gap(uncovered, "GUITAR", "expert_demos", **common)
    elapsed = time.perf_counter() - start
    ok = preconditions and wins >= 8 and elapsed < 600
    record_criterion(9, ok, f"mixture beats expert resets in {wins}/10 [{' '.join(details)}]; "
                            f"uncovered (C_B={c_b}) mix={u_mix:.2f} expert={u_exp:.2f} "
                            f"(not asserted) time={elapsed:.1f}s")
    assert ok


def test_criterion_10_determinism(record_criterion, tmp_path):
    configs = [
        {"scenario": "time_constraint_maze", "algorithm": "GUITAR", "num_expert": 100,
         "num_offline": 200, "iterations": 20, "seeds": [0, 1]},
        {"scenario": "block_maze", "algorithm": "STILE", "seeds": [3]},
        {"scenario": "coverage/2", "algorithm": "BC_mixed", "num_offline": 100, "seeds": [0, 5]},
        {"scenario": "random_masked/7", "algorithm": "MM", "mode": "exact", "seeds": [2]},
    ]
    mismatches = []
    count = 0
    for i, cfg in enumerate(configs):
        a = run_experiment(dict(cfg), tmp_path / f"a{i}")
        b = run_experiment(dict(cfg), tmp_path / f"b{i}")
        names = sorted(p.name for p in a.iterdir())
        if names != sorted(p.name for p in b.iterdir()):
            mismatches.append(f"{cfg['scenario']}: file lists differ")
            continue
        for name in names:
            count += 1
            if (a / name).read_bytes() != (b / name).read_bytes():
                mismatches.append(f"{cfg['scenario']}/{name}")
    ok = not mismatches
    record_criterion(10, ok, f"{count} files compared, mismatches={mismatches}")
    assert ok
