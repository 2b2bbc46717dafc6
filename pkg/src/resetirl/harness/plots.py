"""Plot-data emission. CSV is the canonical output; SVG figures are rendered alongside."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..bounds import completeness_upper, population_mixture
from ..classes import ResetDistribution, reward_agnostic_completeness
from ..instances import tremble_policy
from ..mdp import ConfigurationError, compute_occupancy
from .experiment import load_result, read_trace
from .scenarios import get_scenario

PLOT_KINDS = ("gap_curve", "bound_decomposition", "coverage_table", "completeness_heatmap")


def _matplotlib():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed ids and no timestamp keep SVG output byte-stable
    matplotlib.rcParams["svg.hashsalt"] = "resetirl"
    matplotlib.rcParams["svg.fonttype"] = "none"
    return plt


def _save_svg(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    fig.clf()


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])


def interquartile_mean(values) -> float:
    """Mean of the middle 50% (by rank) of the values."""
    arr = np.sort(np.asarray(values, dtype=float))
    n = len(arr)
    lo, hi = int(math.floor(0.25 * n)), int(math.ceil(0.75 * n))
    if hi <= lo:
        return float(arr.mean())
    return float(arr[lo:hi].mean())


def _label(result: dict) -> str:
    cfg = result["config"]
    reset = f"[{cfg['reset']}]" if cfg.get("reset") else ""
    return f"{cfg['scenario']}:{cfg['algorithm']}{reset}"


def _traces(path: Path, result: dict) -> list[np.ndarray]:
    base = path if path.is_dir() else path.parent
    return [read_trace(base / f"trace_seed{r['seed']}.csv") for r in result["seeds"]]


def gap_curve(result_paths, out_dir, iqm: bool = False) -> list[Path]:
    """Per-iteration gap across seeds: mean, standard error and IQM."""
    rows = []
    series = []
    for p in map(Path, result_paths):
        result = load_result(p)
        traces = _traces(p, result)
        n = min(len(t) for t in traces)
        gaps = np.stack([t[:n, 2] for t in traces])
        label = _label(result)
        means, errs, iqms = [], [], []
        for i in range(n):
            col = gaps[:, i]
            mean = float(col.mean())
            err = float(col.std(ddof=1) / math.sqrt(len(col))) if len(col) > 1 else 0.0
            mid = interquartile_mean(col)
            rows.append((label, i + 1, mean, err, mid, len(col)))
            means.append(mean), errs.append(err), iqms.append(mid)
        series.append((label, np.array(iqms if iqm else means), np.array(errs)))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "gap_curve.csv"
    _write_csv(csv_path, ("label", "iter", "mean_gap", "stderr", "iqm_gap", "num_seeds"), rows)
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, center, err in series:
        x = np.arange(1, len(center) + 1)
        ax.plot(x, center, label=label)
        ax.fill_between(x, center - err, center + err, alpha=0.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("IQM gap" if iqm else "mean gap")
    ax.legend(fontsize=7)
    svg_path = out / "gap_curve.svg"
    _save_svg(fig, svg_path)
    plt.close(fig)
    return [csv_path, svg_path]


def bound_decomposition(result_paths, out_dir) -> list[Path]:
    """Running mixture gap against the misspecification, optimization and regret terms."""
    rows = []
    for p in map(Path, result_paths):
        result = load_result(p)
        cfg = result["config"]
        scenario = get_scenario(cfg["scenario"])
        mdp = scenario.mdp
        H, K = mdp.horizon, len(scenario.reward_class)
        rho = ResetDistribution(compute_occupancy(mdp, scenario.expert).state_per_step)
        eps_pi, _ = completeness_upper(mdp, scenario.policy_class, scenario.reward_class, rho)
        traces = _traces(p, result)
        n = min(len(t) for t in traces)
        gap = np.mean([t[:n, 2] for t in traces], axis=0)
        running = np.cumsum(gap) / np.arange(1, n + 1)
        for i in range(n):
            regret = H * math.sqrt(math.log(K) / (i + 1)) if K > 1 else 0.0
            opt = H * H * float(cfg.get("epsilon", 0.0))
            rows.append((_label(result), i + 1, float(running[i]), H * eps_pi, opt, regret,
                         H * eps_pi + opt + regret))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "bound_decomposition.csv"
    _write_csv(csv_path, ("label", "iter", "mixture_gap", "misspecification", "optimization",
                          "regret", "bound"), rows)
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in dict.fromkeys(r[0] for r in rows):
        sel = [r for r in rows if r[0] == label]
        x = [r[1] for r in sel]
        ax.plot(x, [r[2] for r in sel], label=f"{label} gap")
        ax.plot(x, [r[6] for r in sel], linestyle="--", label=f"{label} bound")
    ax.set_xlabel("iteration")
    ax.set_ylabel("value")
    ax.legend(fontsize=7)
    svg_path = out / "bound_decomposition.svg"
    _save_svg(fig, svg_path)
    plt.close(fig)
    return [csv_path, svg_path]


def state_coverage(numerator: np.ndarray, denominator: np.ndarray) -> float:
    support = numerator > 0
    if np.any(denominator[support] <= 0):
        return math.inf
    return float(np.max(numerator[support] / denominator[support])) if support.any() else 0.0


def _reset_state_marginals(scenario, num_expert: int, num_offline: int) -> dict:
    """Population (infinite-data) averaged state distribution of each reset kind."""
    mdp = scenario.mdp
    out = {"start_state": mdp.start_dist,
           "expert_demos": compute_occupancy(mdp, scenario.expert).state_per_step.mean(axis=0),
           "occupancy:pistar": compute_occupancy(mdp, scenario.pistar()).state_per_step.mean(axis=0)}
    if scenario.offline_policy is not None:
        behavior = tremble_policy(scenario.offline_policy, scenario.offline_tremble)
        d_b = compute_occupancy(mdp, behavior).state_per_step
        if scenario.offline_max_steps is not None:
            d_b = d_b[:scenario.offline_max_steps]
        out["offline_demos"] = d_b.mean(axis=0)
        out["mixture"] = population_mixture(scenario, num_expert, max(num_offline, 1)).averaged
    return out


def coverage_table(result_paths, out_dir) -> list[Path]:
    """``max d^{pi*}(s) / rho(s)`` for each reset kind, per scenario in the results."""
    rows = []
    seen = set()
    for p in map(Path, result_paths):
        cfg = load_result(p)["config"]
        if cfg["scenario"] in seen:
            continue
        seen.add(cfg["scenario"])
        scenario = get_scenario(cfg["scenario"])
        marg = _reset_state_marginals(scenario, cfg["num_expert"], cfg["num_offline"])
        target = marg["occupancy:pistar"]
        for name, dist in marg.items():
            rows.append((scenario.id, name, state_coverage(target, dist)))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "coverage_table.csv"
    _write_csv(csv_path, ("scenario", "reset", "coverage"), rows)
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(6, 0.4 * len(rows) + 1))
    ax.axis("off")
    ax.table(cellText=[[r[0], r[1], f"{r[2]:.3g}"] for r in rows],
             colLabels=["scenario", "reset", "coverage"], loc="center")
    svg_path = out / "coverage_table.svg"
    _save_svg(fig, svg_path)
    plt.close(fig)
    return [csv_path, svg_path]


def completeness_heatmap(result_paths, out_dir) -> list[Path]:
    """Completeness error per (reset kind, base reward)."""
    rows = []
    grids = []
    seen = set()
    for p in map(Path, result_paths):
        cfg = load_result(p)["config"]
        if cfg["scenario"] in seen:
            continue
        seen.add(cfg["scenario"])
        scenario = get_scenario(cfg["scenario"])
        mdp = scenario.mdp
        resets = {"expert_occupancy": compute_occupancy(mdp, scenario.expert).state_per_step,
                  "pistar_occupancy": compute_occupancy(mdp, scenario.pistar()).state_per_step}
        if scenario.offline_policy is not None:
            resets["population_mixture"] = population_mixture(
                scenario, cfg["num_expert"], max(cfg["num_offline"], 1)).per_step
        grid = []
        for name, rho in resets.items():
            rep = reward_agnostic_completeness(mdp, scenario.policy_class, scenario.reward_class,
                                               ResetDistribution(rho, name))
            errs = np.atleast_2d(rep.per_pair_errors).max(axis=0)
            grid.append(errs)
            for k, rname in enumerate(scenario.reward_class.names):
                rows.append((scenario.id, name, rname, float(errs[k]), rep.exact))
        grids.append((scenario, list(resets), np.array(grid)))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "completeness_heatmap.csv"
    _write_csv(csv_path, ("scenario", "reset", "reward", "error", "exact"), rows)
    plt = _matplotlib()
    fig, axes = plt.subplots(1, len(grids), figsize=(4 * len(grids), 3), squeeze=False)
    for ax, (scenario, names, grid) in zip(axes[0], grids):
        im = ax.imshow(grid, cmap="viridis", aspect="auto")
        ax.set_yticks(range(len(names)), names, fontsize=7)
        ax.set_xticks(range(len(scenario.reward_class.names)), scenario.reward_class.names,
                      fontsize=7)
        ax.set_title(scenario.id, fontsize=8)
        fig.colorbar(im, ax=ax)
    svg_path = out / "completeness_heatmap.svg"
    _save_svg(fig, svg_path)
    plt.close(fig)
    return [csv_path, svg_path]


def emit_plot_data(kind: str, result_paths, out_dir, iqm: bool = False) -> list[Path]:
    paths = list(result_paths)
    if not paths:
        raise ConfigurationError("no result files given")
    if kind == "gap_curve":
        return gap_curve(paths, out_dir, iqm=iqm)
    if kind == "bound_decomposition":
        return bound_decomposition(paths, out_dir)
    if kind == "coverage_table":
        return coverage_table(paths, out_dir)
    if kind == "completeness_heatmap":
        return completeness_heatmap(paths, out_dir)
    raise ConfigurationError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
