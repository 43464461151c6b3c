"""Trajectory containers shared by the whole pipeline.

A trajectory is a fixed-horizon sequence of real state vectors; a batch packs
many trajectories of identical shape into one array so that robustness
evaluation and simulation stay vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

__all__ = ["Trajectory", "TrajectoryBatch"]


@dataclass(frozen=True)
class Trajectory:
    """One realization: ``states`` has shape (horizon, state_dim).

    Treated as immutable after construction; all evaluation code only reads.
    """

    states: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.states, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError(f"states must be (horizon, dim), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("trajectory contains non-finite states")
        object.__setattr__(self, "states", arr)

    @property
    def horizon(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def init_state(self) -> np.ndarray:
        return self.states[0]


@dataclass
class TrajectoryBatch:
    """Batch of trajectories with shared (horizon, dim).

    ``seeds`` records the per-trajectory RNG seed (regeneration handle) and
    ``modes`` the 1-based dynamical-mode label; both are optional.
    """

    states: np.ndarray  # (count, horizon, dim) float64
    seeds: np.ndarray | None = None  # (count,) uint64
    modes: np.ndarray | None = None  # (count,) int, labels in 1..G

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim != 3:
            raise ValueError(f"states must be (count, horizon, dim), got {self.states.shape}")
        if self.seeds is not None:
            self.seeds = np.asarray(self.seeds, dtype=np.uint64)
            if self.seeds.shape != (len(self),):
                raise ValueError("seeds length mismatch")
        if self.modes is not None:
            self.modes = np.asarray(self.modes, dtype=np.int64)
            if self.modes.shape != (len(self),):
                raise ValueError("modes length mismatch")

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.states.shape[1]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    @property
    def init_states(self) -> np.ndarray:
        return self.states[:, 0, :]

    def __getitem__(self, i: int) -> Trajectory:
        meta = {}
        if self.seeds is not None:
            meta["seed"] = int(self.seeds[i])
        if self.modes is not None:
            meta["mode"] = int(self.modes[i])
        return Trajectory(self.states[i], meta=meta)

    def __iter__(self) -> Iterator[Trajectory]:
        for i in range(len(self)):
            yield self[i]

    def take(self, indices) -> "TrajectoryBatch":
        idx = np.asarray(indices, dtype=np.int64)
        return TrajectoryBatch(
            self.states[idx],
            None if self.seeds is None else self.seeds[idx],
            None if self.modes is None else self.modes[idx],
        )

    @staticmethod
    def concat(batches: Sequence["TrajectoryBatch"]) -> "TrajectoryBatch":
        if not batches:
            raise ValueError("cannot concatenate zero batches")
        states = np.concatenate([b.states for b in batches], axis=0)
        seeds = None
        if all(b.seeds is not None for b in batches):
            seeds = np.concatenate([b.seeds for b in batches])
        modes = None
        if all(b.modes is not None for b in batches):
            modes = np.concatenate([b.modes for b in batches])
        return TrajectoryBatch(states, seeds, modes)

    @staticmethod
    def from_trajectories(trajs: Sequence[Trajectory]) -> "TrajectoryBatch":
        if not trajs:
            raise ValueError("cannot build a batch from zero trajectories")
        states = np.stack([t.states for t in trajs])
        seeds = None
        if all("seed" in t.meta for t in trajs):
            seeds = np.array([t.meta["seed"] for t in trajs], dtype=np.uint64)
        modes = None
        if all("mode" in t.meta for t in trajs):
            modes = np.array([t.meta["mode"] for t in trajs], dtype=np.int64)
        return TrajectoryBatch(states, seeds, modes)
