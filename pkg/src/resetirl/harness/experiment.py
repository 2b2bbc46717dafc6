"""Experiment configuration, orchestration and byte-stable persistence."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .. import __version__
from ..classes import behavioral_cloning
from ..demos import (PRNG_ALGORITHM, STREAM_EXPERT, STREAM_OFFLINE, STREAM_VALIDATION,
                     DemoDataset, make_rng, sample_demos)
from ..guitar import (empirical_loss, guitar_run, make_reset_distribution, trajectory_filter)
from ..mdp import ConfigurationError, NonstationaryPolicy, compute_occupancy
from ..psdp import PsdpConfig, psdp_solve
from ..stile import stile_select
from .scenarios import Scenario, get_scenario

ALGORITHMS = ("BC", "BC_mixed", "MM", "FILTER", "GUITAR", "STILE")
DEFAULT_RESETS = {"MM": "start_state", "FILTER": "expert_demos", "GUITAR": "mixture"}
TRACE_HEADER = ("iter", "J_pi_rstar", "gap", "regret_avg", "loss")
OUTPUT_ENV = "RESETIRL_OUTPUT_DIR"


@dataclass
class ExperimentConfig:
    scenario: str
    algorithm: str
    reset: str | None = None
    iterations: int = 50
    num_expert: int = 100
    num_offline: int = 0
    num_validation: int = 100
    tremble: float | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    output: str | None = None
    mode: str = "sample"
    epsilon: float = 0.0
    learning_rate: float | None = None
    off_support: str = "base"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.num_expert < 1:
            raise ConfigurationError("num_expert must be >= 1")
        if self.num_offline < 0 or self.num_validation < 0:
            raise ConfigurationError("dataset sizes must be nonnegative")
        if self.tremble is not None and not 0.0 <= self.tremble <= 1.0:
            raise ConfigurationError("tremble must lie in [0, 1]")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if self.mode not in ("sample", "exact"):
            raise ConfigurationError("mode must be 'sample' or 'exact'")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        self.seeds = [int(s) for s in self.seeds]
        if self.reset is None and self.algorithm in DEFAULT_RESETS:
            self.reset = DEFAULT_RESETS[self.algorithm]
            if self.reset == "mixture" and self.num_offline == 0:
                self.reset = "expert_demos"

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown config fields {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        doc = self.to_dict()
        doc.pop("output")
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


# --------------------------------------------------------------------------
# data and resets


@dataclass
class SeedData:
    expert: DemoDataset
    offline: DemoDataset | None
    validation: DemoDataset | None


def sample_seed_data(scenario: Scenario, config: ExperimentConfig, seed: int) -> SeedData:
    """Datasets for one seed; each comes from its own stream so every algorithm sees the same data."""
    mdp = scenario.mdp
    expert = sample_demos(mdp, scenario.expert, config.num_expert,
                          seed=make_rng(seed, STREAM_EXPERT), source="expert")
    offline = None
    if config.num_offline > 0:
        if scenario.offline_policy is None:
            raise ConfigurationError(f"scenario {scenario.id} has no offline policy")
        tremble = scenario.offline_tremble if config.tremble is None else config.tremble
        offline = sample_demos(mdp, scenario.offline_policy, config.num_offline, tremble=tremble,
                               seed=make_rng(seed, STREAM_OFFLINE), source="offline",
                               max_steps=scenario.offline_max_steps)
    validation = None
    if config.num_validation > 0:
        validation = sample_demos(mdp, scenario.expert, config.num_validation,
                                  seed=make_rng(seed, STREAM_VALIDATION), source="validation")
    return SeedData(expert, offline, validation)


def parse_reset(spec: str, scenario: Scenario, data: SeedData):
    """Reset spec strings: ``start_state``, ``expert_demos``, ``offline_demos``, ``mixture``,
    ``occupancy:<expert|pistar|offline>``, ``subset:<filter>:<value>``."""
    kind, _, arg = spec.partition(":")
    fill = scenario.reset_fill
    if kind == "occupancy":
        policies = {"expert": scenario.expert, "offline": scenario.offline_policy}
        if arg == "pistar":
            policy = scenario.pistar()
        elif arg in policies and policies[arg] is not None:
            policy = policies[arg]
        else:
            raise ConfigurationError(f"unknown occupancy reset {arg!r}")
        return make_reset_distribution("occupancy", mdp=scenario.mdp, policy=policy)
    if kind == "subset":
        name, _, value = arg.partition(":")
        return make_reset_distribution("demo_subset", expert_demos=data.expert,
                                       keep=trajectory_filter(name, value), fill=fill)
    return make_reset_distribution(kind, mdp=scenario.mdp, expert_demos=data.expert,
                                   offline_demos=data.offline, fill=fill)


# --------------------------------------------------------------------------
# algorithms


def _evaluate(scenario: Scenario, policy: NonstationaryPolicy, j_expert: float,
              data: SeedData, expert_occ) -> dict:
    occ = compute_occupancy(scenario.mdp, policy)
    j = float(np.einsum("hsa,sa->", occ.per_step, scenario.mdp.reward))
    losses = [empirical_loss(r, occ, expert_demos=data.expert) for r in scenario.reward_class.base]
    return {"J_pi_rstar": j, "gap": j_expert - j, "loss": float(max(losses)),
            "normalized_value": j / scenario.value_scale}


def stile_candidates(scenario: Scenario, data: SeedData) -> tuple[list[str], list[NonstationaryPolicy]]:
    mdp, cls = scenario.mdp, scenario.policy_class
    names = ["uniform_allowed", "bc"]
    pols = [cls.base_policy(mdp.horizon), behavioral_cloning(data.expert, cls)]
    if data.offline is not None:
        names.append("bc_mixed")
        pols.append(behavioral_cloning(data.expert.concat(data.offline), cls))
    names.append("pistar")
    pols.append(scenario.pistar())
    start = make_reset_distribution("start_state", mdp=mdp)
    for name, r in zip(scenario.reward_class.names, scenario.reward_class.base):
        names.append(f"optimal_{name}")
        pols.append(psdp_solve(mdp, cls, r, PsdpConfig(reset=start)))
    return names, pols


def run_seed(scenario: Scenario, config: ExperimentConfig, seed: int) -> dict:
    data = sample_seed_data(scenario, config, seed)
    mdp = scenario.mdp
    occ_e = compute_occupancy(mdp, scenario.expert)
    j_expert = float(np.einsum("hsa,sa->", occ_e.per_step, mdp.reward))
    out = {"seed": seed, "J_expert_rstar": j_expert}
    algo = config.algorithm
    if algo in ("BC", "BC_mixed"):
        demos = data.expert
        if algo == "BC_mixed":
            if data.offline is None:
                raise ConfigurationError("BC_mixed needs num_offline > 0")
            demos = demos.concat(data.offline)
        policy = behavioral_cloning(demos, scenario.policy_class)
        ev = _evaluate(scenario, policy, j_expert, data, occ_e)
        out.update(final_gap=ev["gap"], final_normalized_value=ev["normalized_value"],
                   trace=[(1, ev["J_pi_rstar"], ev["gap"], 0.0, ev["loss"])])
    elif algo == "STILE":
        names, pols = stile_candidates(scenario, data)
        res = stile_select(mdp, pols, data.expert)
        ev = _evaluate(scenario, res.policy, j_expert, data, occ_e)
        out.update(final_gap=ev["gap"], final_normalized_value=ev["normalized_value"],
                   selected=names[res.selected_index], candidates=names,
                   scores=res.scores.tolist(),
                   trace=[(1, ev["J_pi_rstar"], ev["gap"], 0.0, ev["loss"])])
    else:
        rho = parse_reset(config.reset, scenario, data)
        cfg = PsdpConfig(epsilon=config.epsilon, adversarial=config.epsilon > 0,
                         off_support=config.off_support)
        kwargs = ({"expert_occupancy": occ_e} if config.mode == "exact"
                  else {"expert_demos": data.expert})
        res = guitar_run(mdp, scenario.policy_class, scenario.reward_class, rho, config.iterations,
                         psdp_config=cfg, validation_demos=data.validation,
                         reference_occupancy=occ_e, learning_rate=config.learning_rate, **kwargs)
        out.update(final_gap=res.selected_gap,
                   final_normalized_value=float(res.j_rstar[res.selected_index]) / scenario.value_scale,
                   mixture_gap=res.mixture_gap, selected_index=res.selected_index,
                   learning_rate=res.learning_rate, weights_final=res.weights[-1].tolist(),
                   trace=res.trace_rows())
    return out


# --------------------------------------------------------------------------
# persistence


def _csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for row in rows:
        writer.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
    return buf.getvalue()


def _json_text(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"


def default_output(config: ExperimentConfig) -> Path:
    root = Path(os.environ.get(OUTPUT_ENV, "results"))
    slug = config.scenario.replace("/", "-")
    return root / f"{slug}_{config.algorithm}_{config.digest()[:10]}"


def summarize(values) -> dict:
    arr = np.asarray(values, dtype=float)
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return {"mean": float(arr.mean()), "stderr": stderr, "min": float(arr.min()),
            "max": float(arr.max())}


def run_experiment(config: ExperimentConfig | dict, output: str | os.PathLike | None = None) -> Path:
    """Run every seed, write ``result.json``, ``trace_seed<k>.csv`` and ``manifest.json``.

    Outputs contain no timestamps, so identical configs give identical bytes.
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    scenario = get_scenario(config.scenario)
    out_dir = Path(output or config.output or default_output(config))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {out_dir}: {exc}") from None
    per_seed = [run_seed(scenario, config, seed) for seed in config.seeds]
    files = {}
    for res in per_seed:
        name = f"trace_seed{res['seed']}.csv"
        files[name] = _csv_text(res.pop("trace"))
    result = {
        "config": config.to_dict(),
        "scenario": scenario.summary(),
        "seeds": per_seed,
        "summary": {"final_gap": summarize([r["final_gap"] for r in per_seed]),
                    "final_normalized_value": summarize([r["final_normalized_value"] for r in per_seed])},
    }
    files["result.json"] = _json_text(result)
    for name, text in files.items():
        (out_dir / name).write_text(text)
    manifest = {
        "config_sha256": config.digest(),
        "prng": PRNG_ALGORITHM,
        "package_version": __version__,
        "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
    }
    (out_dir / "manifest.json").write_text(_json_text(manifest))
    return out_dir


def _run_one(args) -> str:
    config, output = args
    return str(run_experiment(config, output))


def run_grid(configs, outputs=None, workers: int = 1) -> list[Path]:
    """Run independent configs, optionally on a process pool; results keep input order."""
    configs = list(configs)
    outputs = list(outputs) if outputs is not None else [None] * len(configs)
    jobs = list(zip(configs, outputs))
    if workers <= 1:
        return [Path(_run_one(job)) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [Path(p) for p in pool.map(_run_one, jobs)]


def load_result(path: str | os.PathLike) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "result.json"
    return json.loads(p.read_text())


def read_trace(path: str | os.PathLike) -> np.ndarray:
    """Trace CSV as an ``(n, 5)`` float array."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != TRACE_HEADER:
        raise ConfigurationError(f"{path}: unexpected trace header")
    return np.array([[float(x) for x in row] for row in rows[1:]])
