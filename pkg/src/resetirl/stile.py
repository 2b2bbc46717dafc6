"""Scheffé-tournament selection over an explicit policy list, with known dynamics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .demos import DemoDataset
from .mdp import ConfigurationError, NonstationaryPolicy, OccupancyTensor, TabularMdp, compute_occupancy


@dataclass(frozen=True, eq=False)
class WitnessFunction:
    values: np.ndarray  # (S, A) entries in {-1, +1}
    pair: tuple[int, int] = (-1, -1)

    def gap(self, occ_a: OccupancyTensor, occ_b: OccupancyTensor) -> float:
        return float(np.sum((occ_a.averaged - occ_b.averaged) * self.values))


def witness(occ_a: OccupancyTensor, occ_b: OccupancyTensor, pair: tuple[int, int] = (-1, -1)) -> WitnessFunction:
    """``sign(d_a - d_b)`` on averaged occupancies with ``sign(0) = +1``."""
    if occ_a.per_step.shape != occ_b.per_step.shape:
        raise ConfigurationError("occupancies come from different MDPs")
    diff = occ_a.averaged - occ_b.averaged
    return WitnessFunction(np.where(diff >= 0.0, 1.0, -1.0), pair)


@dataclass
class StileResult:
    selected_index: int
    policy: NonstationaryPolicy = field(repr=False)
    scores: np.ndarray  # (num_policies,) worst witness discrepancy
    score_matrix: np.ndarray  # (num_policies, num_witnesses)
    witnesses: list[WitnessFunction] = field(repr=False)

    @property
    def num_witnesses(self) -> int:
        return len(self.witnesses)

    def to_dict(self, include_matrix: bool = False) -> dict:
        doc = {"selected_index": self.selected_index, "scores": self.scores.tolist(),
               "num_witnesses": self.num_witnesses,
               "witness_pairs": [list(w.pair) for w in self.witnesses]}
        if include_matrix:
            doc["score_matrix"] = self.score_matrix.tolist()
        return doc


def _distinct(occupancies: list[OccupancyTensor]) -> list[int]:
    """Index of the first policy for every distinct averaged occupancy."""
    seen: dict[bytes, int] = {}
    for i, occ in enumerate(occupancies):
        seen.setdefault(occ.averaged.tobytes(), i)
    return sorted(seen.values())


def stile_select(mdp: TabularMdp, policies, expert_demos: DemoDataset,
                 occupancies: list[OccupancyTensor] | None = None) -> StileResult:
    """Pick the policy whose occupancy has the smallest worst-witness discrepancy
    from the pooled expert sample; ties go to the lowest list index.

    Witnesses are built over distinct occupancies only, so duplicated list
    entries never change the selection. ``occupancies`` may be passed to reuse
    exact occupancies across repeated calls.
    """
    policies = list(policies)
    if not policies:
        raise ConfigurationError("STILE needs at least one policy")
    if len(expert_demos) == 0:
        raise ConfigurationError("STILE needs expert demonstrations")
    occs = occupancies if occupancies is not None else [compute_occupancy(mdp, p) for p in policies]
    if len(occs) != len(policies):
        raise ConfigurationError("one occupancy per policy is required")
    reps = _distinct(occs)
    witnesses = [witness(occs[i], occs[j], (i, j)) for i in reps for j in reps if i != j]
    if not witnesses:
        return StileResult(0, policies[0], np.zeros(len(policies)),
                           np.zeros((len(policies), 0)), [])
    fvals = np.stack([w.values for w in witnesses])  # (F, S, A)
    sample_mean = fvals[:, expert_demos.states, expert_demos.actions].mean(axis=1)
    model_mean = np.einsum("psa,fsa->pf", np.stack([o.averaged for o in occs]), fvals)
    matrix = model_mean - sample_mean[None, :]
    scores = matrix.max(axis=1)
    best = int(np.argmin(scores))
    return StileResult(best, policies[best], scores, matrix, witnesses)


def realizable_bound(horizon: int, num_policies: int, num_samples: int, delta: float) -> float:
    """``4H sqrt((2 ln|Pi| + ln(1/delta)) / N)``."""
    return 4.0 * horizon * math.sqrt((2.0 * math.log(num_policies) + math.log(1.0 / delta))
                                     / num_samples)


def misspecified_bound(horizon: int, min_l1: float, num_witnesses: int, num_samples: int,
                       delta: float) -> float:
    """``3H min ||d^pi - d^E||_1 + 4H sqrt(ln(|F|/delta) / N)``."""
    return 3.0 * horizon * min_l1 + 4.0 * horizon * math.sqrt(
        math.log(max(num_witnesses, 1) / delta) / num_samples)


def min_l1_distance(mdp: TabularMdp, policies, expert: NonstationaryPolicy) -> float:
    target = compute_occupancy(mdp, expert).averaged
    return min(float(np.abs(compute_occupancy(mdp, p).averaged - target).sum()) for p in policies)
