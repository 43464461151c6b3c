"""Non-parametric resampling surrogate.

Samples trajectories for a query initial state by drawing (with
replacement) among the `k_nn` training trajectories whose initial states
are nearest in Euclidean distance, rigidly translating each draw so it
starts exactly at the query state.  Model-free, so it exercises the
conformal pipeline independently of diffusion training quality.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..trajectories import TrajectoryBatch

__all__ = ["ResamplePool", "resample_surrogate"]


def _pool_states(pool) -> np.ndarray:
    if hasattr(pool, "batch"):  # Dataset
        return pool.batch.states
    if hasattr(pool, "states"):  # TrajectoryBatch
        return pool.states
    return np.asarray(pool, dtype=np.float64)


def resample_surrogate(pool, s0, count: int, k_nn: int, seed: int) -> TrajectoryBatch:
    states = _pool_states(pool)
    if states.ndim != 3 or states.shape[0] < 1:
        raise ValueError("pool must contain at least one (H, n) trajectory")
    if not (1 <= k_nn <= states.shape[0]):
        raise ValueError(f"k_nn must be in [1, {states.shape[0]}], got {k_nn}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    s0 = np.asarray(s0, dtype=np.float64)
    if s0.shape != (states.shape[2],):
        raise ValueError(f"s0 must have shape ({states.shape[2]},), got {s0.shape}")
    inits = states[:, 0, :]
    order = np.argsort(np.linalg.norm(inits - s0, axis=1), kind="stable")
    neighbors = order[:k_nn]
    rng = np.random.default_rng(seed)
    chosen = neighbors[rng.integers(0, k_nn, size=count)]
    out = states[chosen] + (s0 - inits[chosen])[:, None, :]
    out[:, 0, :] = s0  # pin the start exactly; translation rounds
    return TrajectoryBatch(out)


@dataclass(frozen=True)
class ResamplePool:
    """Sampler-interface wrapper so the conformal stage can treat the
    resampler and the diffusion model interchangeably."""

    states: np.ndarray  # (N, H, n)
    k_nn: int = 50
    scenario_id: str = ""

    def __post_init__(self):
        states = np.ascontiguousarray(_pool_states(self.states), dtype=np.float64)
        object.__setattr__(self, "states", states)
        if states.ndim != 3 or states.shape[0] < 1:
            raise ValueError("pool must contain at least one (H, n) trajectory")
        if not (1 <= self.k_nn <= states.shape[0]):
            raise ValueError(f"k_nn must be in [1, {states.shape[0]}], got {self.k_nn}")

    @property
    def horizon(self) -> int:
        return self.states.shape[1]

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.states.tobytes())
        h.update(str(self.k_nn).encode())
        return f"resample-{self.scenario_id}-{h.hexdigest()[:12]}"

    def sample(self, s0, count: int, seed: int) -> TrajectoryBatch:
        return resample_surrogate(self.states, s0, count, self.k_nn, seed)
