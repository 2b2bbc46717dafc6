"""Demonstration datasets and seeded trajectory sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import ConfigurationError, NonstationaryPolicy, TabularMdp, check_compatible

# Generator contract recorded in run manifests.
PRNG_ALGORITHM = "numpy.random.PCG64+SeedSequence"

# Sub-stream identifiers; a seed's expert data never depends on which
# algorithm consumes it.
STREAM_EXPERT = 0
STREAM_OFFLINE = 1
STREAM_VALIDATION = 2
STREAM_ALGORITHM = 3


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass(frozen=True, eq=False)
class DemoDataset:
    """Pooled ``(h, s, a)`` records, with the trajectory each record came from."""

    num_states: int
    num_actions: int
    horizon: int
    steps: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    trajectories: np.ndarray
    source: str = "expert"

    def __post_init__(self):
        arrays = [np.asarray(x, dtype=np.int64) for x in
                  (self.steps, self.states, self.actions, self.trajectories)]
        n = len(arrays[0])
        if any(len(x) != n for x in arrays):
            raise ConfigurationError("demo record arrays must have equal length")
        h, s, a, _ = arrays
        if n and (h.min() < 0 or h.max() >= self.horizon or s.min() < 0
                  or s.max() >= self.num_states or a.min() < 0 or a.max() >= self.num_actions):
            raise ConfigurationError("demo record out of range")
        for name, arr in zip(("steps", "states", "actions", "trajectories"), arrays):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def per_h_counts(self) -> np.ndarray:
        return np.bincount(self.steps, minlength=self.horizon)

    def pair_counts(self) -> np.ndarray:
        """``(H, S, A)`` table of record counts."""
        counts = np.zeros((self.horizon, self.num_states, self.num_actions))
        np.add.at(counts, (self.steps, self.states, self.actions), 1.0)
        return counts

    def state_counts(self) -> np.ndarray:
        return self.pair_counts().sum(axis=-1)

    def empirical_pair_distribution(self) -> np.ndarray:
        """Uniform distribution over all records, pooled across time steps."""
        if len(self) == 0:
            raise ConfigurationError("empty demo dataset")
        return self.pair_counts().sum(axis=0) / len(self)

    def subset(self, mask) -> "DemoDataset":
        mask = np.asarray(mask, dtype=bool)
        return DemoDataset(self.num_states, self.num_actions, self.horizon,
                           self.steps[mask], self.states[mask], self.actions[mask],
                           self.trajectories[mask], self.source)

    def concat(self, other: "DemoDataset", source: str = "mixed") -> "DemoDataset":
        if (self.num_states, self.num_actions, self.horizon) != \
                (other.num_states, other.num_actions, other.horizon):
            raise ConfigurationError("cannot concatenate datasets from different MDPs")
        offset = self.trajectories.max() + 1 if len(self) else 0
        return DemoDataset(self.num_states, self.num_actions, self.horizon,
                           np.concatenate([self.steps, other.steps]),
                           np.concatenate([self.states, other.states]),
                           np.concatenate([self.actions, other.actions]),
                           np.concatenate([self.trajectories, other.trajectories + offset]),
                           source)

    def to_dict(self) -> dict:
        return {"num_states": self.num_states, "num_actions": self.num_actions,
                "horizon": self.horizon, "source": self.source,
                "records": np.stack([self.trajectories, self.steps, self.states,
                                     self.actions], axis=1).tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "DemoDataset":
        rec = np.asarray(doc["records"], dtype=np.int64).reshape(-1, 4)
        return cls(int(doc["num_states"]), int(doc["num_actions"]), int(doc["horizon"]),
                   rec[:, 1], rec[:, 2], rec[:, 3], rec[:, 0], doc.get("source", "expert"))


def _sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # inverse-CDF sampling of one index per row
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0])[:, None]
    idx = (u >= cdf).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def sample_demos(mdp: TabularMdp, policy: NonstationaryPolicy, num_pairs: int,
                 tremble: float = 0.0, seed: int | np.random.Generator = 0,
                 source: str = "expert", max_steps: int | None = None) -> DemoDataset:
    """Roll out ``policy`` and keep the first ``num_pairs`` ``(h, s, a)`` records.

    With probability ``tremble`` the behavior action at a step is replaced by a
    uniformly random action. ``max_steps`` truncates every roll-out after that
    many steps (records with ``h >= max_steps`` are never produced).
    """
    check_compatible(mdp, policy)
    if not 0.0 <= tremble <= 1.0:
        raise ConfigurationError("tremble must lie in [0, 1]")
    if num_pairs < 1:
        raise ConfigurationError("num_pairs must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    H, S, A = mdp.shape
    steps = H if max_steps is None else max(1, min(H, int(max_steps)))
    n_traj = -(-num_pairs // steps)
    states = _sample_categorical(np.broadcast_to(mdp.start_dist, (n_traj, S)), rng)
    recs_s = np.empty((n_traj, steps), dtype=np.int64)
    recs_a = np.empty((n_traj, steps), dtype=np.int64)
    for h in range(steps):
        acts = _sample_categorical(policy.probs[h, states], rng)
        if tremble > 0.0:
            shake = rng.random(n_traj) < tremble
            acts = np.where(shake, rng.integers(0, A, size=n_traj), acts)
        recs_s[:, h], recs_a[:, h] = states, acts
        if h + 1 < steps:
            states = _sample_categorical(mdp.transitions[h, states, acts], rng)
    traj = np.repeat(np.arange(n_traj), steps)[:num_pairs]
    hs = np.tile(np.arange(steps), n_traj)[:num_pairs]
    return DemoDataset(S, A, H, hs, recs_s.ravel()[:num_pairs], recs_a.ravel()[:num_pairs],
                       traj, source)
