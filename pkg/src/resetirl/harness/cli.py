"""Command-line interface.

    resetirl scenario list
    resetirl scenario show <id>
    resetirl run <config.json> [--output DIR] [--workers N]
    resetirl analyze completeness <scenario> --reset <spec>
    resetirl analyze pistar <scenario>
    resetirl verify bounds [scenario] --theorem <name>
    resetirl plot <kind> <results...> [--output DIR] [--iqm]

Errors are reported as a JSON object on stderr with a nonzero exit code.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .. import bounds
from ..classes import (BudgetExceeded, ResetDistribution, reward_agnostic_completeness,
                       worst_case_gap)
from ..mdp import ConfigurationError, compute_occupancy
from .experiment import OUTPUT_ENV, ExperimentConfig, parse_reset, run_grid, sample_seed_data
from .plots import PLOT_KINDS, emit_plot_data
from .scenarios import get_scenario, list_scenarios

THEOREMS = {
    "guitar-exact": "guitar-exact", "4.3": "guitar-exact",
    "guitar-finite": "guitar-finite", "D.1": "guitar-finite",
    "stile-realizable": "stile-realizable", "B.1": "stile-realizable",
    "stile-misspecified": "stile-misspecified", "stile": "stile-misspecified",
}

POPULATION_RESETS = ("expert_occupancy", "pistar_occupancy", "offline_occupancy",
                     "population_mixture")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(doc) -> None:
    print(json.dumps(doc, sort_keys=True, indent=2, default=_json_default))


def _output_root(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUTPUT_ENV, "results"))


# --------------------------------------------------------------------------
# verbs


def cmd_scenario(args) -> int:
    if args.action == "list":
        for sid in list_scenarios():
            print(sid)
        return 0
    if not args.id:
        raise ConfigurationError("scenario show needs an id")
    scenario = get_scenario(args.id)
    doc = scenario.summary()
    doc["J_expert_normalized"] = scenario.normalized_value(scenario.expert)
    if args.with_pistar:
        doc["J_pistar_normalized"] = scenario.normalized_value(scenario.pistar())
    _emit(doc)
    return 0


def cmd_run(args) -> int:
    doc = json.loads(Path(args.config).read_text())
    docs = doc if isinstance(doc, list) else [doc]
    configs = [ExperimentConfig.from_dict(d) for d in docs]
    outputs = None
    if args.output:
        root = Path(args.output)
        outputs = [root] if len(configs) == 1 else [root / f"run{i}" for i in range(len(configs))]
    paths = run_grid(configs, outputs, workers=args.workers)
    _emit({"outputs": [str(p) for p in paths]})
    return 0


def _population_reset(scenario, spec: str, num_expert: int, num_offline: int) -> ResetDistribution:
    mdp = scenario.mdp
    if spec == "expert_occupancy":
        return ResetDistribution(compute_occupancy(mdp, scenario.expert).state_per_step, spec)
    if spec == "pistar_occupancy":
        return ResetDistribution(compute_occupancy(mdp, scenario.pistar()).state_per_step, spec)
    if spec == "offline_occupancy":
        if scenario.offline_policy is None:
            raise ConfigurationError(f"scenario {scenario.id} has no offline policy")
        return ResetDistribution(compute_occupancy(mdp, scenario.offline_policy).state_per_step, spec)
    return bounds.population_mixture(scenario, num_expert, num_offline)


def cmd_analyze(args) -> int:
    scenario = get_scenario(args.scenario)
    mdp = scenario.mdp
    if args.what == "completeness":
        if args.reset in POPULATION_RESETS:
            rho = _population_reset(scenario, args.reset, args.num_expert, args.num_offline)
        else:
            cfg = ExperimentConfig(scenario.id, "GUITAR", num_expert=args.num_expert,
                                   num_offline=args.num_offline, num_validation=0, seeds=[args.seed])
            data = sample_seed_data(scenario, cfg, args.seed)
            rho = parse_reset(args.reset, scenario, data)
        report = reward_agnostic_completeness(mdp, scenario.policy_class, scenario.reward_class,
                                              rho, enumeration_budget=args.budget,
                                              allow_lower_bound=not args.exact_only)
        doc = report.to_dict()
        doc.update(scenario=scenario.id, reset=args.reset,
                   reward_names=list(scenario.reward_class.names))
        _emit(doc)
        return 0
    pistar = scenario.pistar()
    gap, k = worst_case_gap(mdp, pistar, scenario.reward_class, scenario.expert)
    _emit({"scenario": scenario.id, "worst_case_gap": gap,
           "worst_reward": scenario.reward_class.names[k],
           "J_expert_normalized": scenario.normalized_value(scenario.expert),
           "J_pistar_normalized": scenario.normalized_value(pistar),
           "policy": pistar.to_dict()})
    return 0


def cmd_verify(args) -> int:
    theorem = THEOREMS.get(args.theorem)
    if theorem is None:
        raise ConfigurationError(f"unknown theorem {args.theorem!r}; expected one of {sorted(THEOREMS)}")
    if args.scenario is None and theorem.startswith("guitar"):
        raise ConfigurationError(f"{theorem} needs a scenario")
    # the STILE checks fall back to their fixed random instance
    scenario = get_scenario(args.scenario) if args.scenario else None
    extra = {}
    if theorem == "guitar-exact":
        check = bounds.guitar_exact_check(scenario, iterations=tuple(args.iterations or (16, 64, 256)))
    elif theorem == "guitar-finite":
        check = bounds.guitar_finite_check(scenario, args.num_expert, args.num_offline,
                                           trials=args.trials, delta=args.delta, seed=args.seed,
                                           iterations=(args.iterations or [64])[0])
    elif theorem == "stile-realizable":
        check, slopes = bounds.stile_realizable_check(scenario, trials=args.trials,
                                                      delta=args.delta, seed=args.seed)
        extra["slopes"] = slopes
    else:
        check = bounds.stile_misspecified_check(scenario, trials=args.trials, delta=args.delta,
                                                seed=args.seed)
    doc = check.to_dict()
    doc.update(extra, scenario=scenario.id if scenario else None, theorem=theorem)
    if not args.rows:
        doc.pop("rows")
    if args.output:
        Path(args.output).write_text(json.dumps(check.to_dict() | extra, sort_keys=True, indent=2,
                                                default=_json_default) + "\n")
    _emit(doc)
    return 1 if args.strict and not check.passed else 0


def cmd_plot(args) -> int:
    out = _output_root(args.output) / "plots" if not args.output else Path(args.output)
    paths = emit_plot_data(args.kind, args.results, out, iqm=args.iqm)
    _emit({"files": [str(p) for p in paths]})
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resetirl", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="list or describe built-in scenarios")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("id", nargs="?")
    p.add_argument("--with-pistar", action="store_true", help="also solve for the optimal realizable policy")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("run", help="run an experiment config (object or list of objects)")
    p.add_argument("config")
    p.add_argument("--output", help=f"output directory (default: ${OUTPUT_ENV} or ./results)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="structural quantities of a scenario")
    p.add_argument("what", choices=("completeness", "pistar"))
    p.add_argument("scenario")
    p.add_argument("--reset", default="expert_occupancy",
                   help=f"one of {POPULATION_RESETS} or a run reset spec")
    p.add_argument("--budget", type=int, default=10**6)
    p.add_argument("--exact-only", action="store_true", help="fail instead of falling back to bounds")
    p.add_argument("--num-expert", type=int, default=100)
    p.add_argument("--num-offline", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="check a sample-complexity inequality numerically")
    p.add_argument("what", choices=("bounds",))
    p.add_argument("scenario", nargs="?", help="optional for the STILE checks")
    p.add_argument("--theorem", default="guitar-exact", help=f"one of {sorted(THEOREMS)}")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--num-expert", type=int, default=50)
    p.add_argument("--num-offline", type=int, default=0)
    p.add_argument("--iterations", type=int, nargs="*")
    p.add_argument("--delta", type=float, default=bounds.DEFAULT_DELTA)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rows", action="store_true", help="include per-run rows in the output")
    p.add_argument("--output", help="also write the full check (with rows) to this JSON file")
    p.add_argument("--strict", action="store_true", help="exit 1 when the check fails")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="emit plot CSV and SVG from result directories")
    p.add_argument("kind", choices=PLOT_KINDS)
    p.add_argument("results", nargs="+")
    p.add_argument("--output")
    p.add_argument("--iqm", action="store_true")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, BudgetExceeded, OSError, json.JSONDecodeError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
