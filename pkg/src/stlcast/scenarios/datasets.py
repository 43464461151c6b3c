"""Dataset generation and persistence.

Three splits: `train` is a flat pool of trajectories with independently
drawn initial states; `calibration` and `test` are lists of initial states
with a fixed number of trajectories simulated from each.  Persistence is
JSON-Lines (one trajectory per record) with an optional flat binary
container for bulk state arrays.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from ..rng import substream, substream_seed
from ..trajectories import TrajectoryBatch
from .core import Scenario, get_scenario, simulate_trajectories

__all__ = [
    "SplitSizes",
    "PAPER_SIZES",
    "DESK_SIZES",
    "Dataset",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "save_states_binary",
    "load_states_binary",
]


@dataclass(frozen=True)
class SplitSizes:
    train: int
    cal_states: int
    cal_per_state: int
    test_states: int
    test_per_state: int

    def __post_init__(self):
        for name in ("train", "cal_states", "cal_per_state", "test_states", "test_per_state"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


PAPER_SIZES = SplitSizes(train=3000, cal_states=600, cal_per_state=300, test_states=200, test_per_state=300)
DESK_SIZES = SplitSizes(train=1000, cal_states=200, cal_per_state=100, test_states=100, test_per_state=100)


@dataclass
class Dataset:
    """One split.  For calibration/test, `group_sizes[j]` trajectories share
    the j-th initial state and are stored contiguously in `batch`."""

    scenario_id: str
    split: str  # train | calibration | test
    batch: TrajectoryBatch
    group_sizes: np.ndarray | None = None

    def __post_init__(self):
        if self.split not in ("train", "calibration", "test"):
            raise ValueError(f"unknown split {self.split!r}")
        if self.group_sizes is not None:
            self.group_sizes = np.asarray(self.group_sizes, dtype=np.int64)
            if self.group_sizes.sum() != len(self.batch):
                raise ValueError("group sizes do not add up to the batch size")

    def __len__(self) -> int:
        return len(self.batch)

    @property
    def n_groups(self) -> int:
        return 1 if self.group_sizes is None else len(self.group_sizes)

    @property
    def group_offsets(self) -> np.ndarray:
        sizes = self.group_sizes if self.group_sizes is not None else np.array([len(self.batch)])
        return np.concatenate([[0], np.cumsum(sizes)])

    def group(self, j: int) -> TrajectoryBatch:
        off = self.group_offsets
        return self.batch.take(np.arange(off[j], off[j + 1]))

    def groups(self) -> Iterator[TrajectoryBatch]:
        for j in range(self.n_groups):
            yield self.group(j)

    @property
    def group_init_states(self) -> np.ndarray:
        """(n_groups, dim); the shared s(0) of each group."""
        return self.batch.states[self.group_offsets[:-1], 0, :]


def generate_dataset(
    scenario: Scenario, sizes: SplitSizes, seed: int
) -> tuple[Dataset, Dataset, Dataset]:
    """Uniformly sampled initial states, exact mode labels, per-trajectory
    seeds; byte-identical output for identical (scenario, sizes, seed)."""
    train_inits = [scenario.sample_init(substream(seed, 0, i)) for i in range(sizes.train)]
    train = TrajectoryBatch.concat(
        [
            simulate_trajectories(scenario, s0, 1, substream_seed(seed, 1, i))
            for i, s0 in enumerate(train_inits)
        ]
    )

    def grouped(split_key: int, n_states: int, per_state: int) -> tuple[TrajectoryBatch, np.ndarray]:
        batches = []
        for j in range(n_states):
            s0 = scenario.sample_init(substream(seed, split_key, 0, j))
            batches.append(
                simulate_trajectories(scenario, s0, per_state, substream_seed(seed, split_key, 1, j))
            )
        return TrajectoryBatch.concat(batches), np.full(n_states, per_state, dtype=np.int64)

    cal_batch, cal_sizes = grouped(2, sizes.cal_states, sizes.cal_per_state)
    test_batch, test_sizes = grouped(3, sizes.test_states, sizes.test_per_state)
    return (
        Dataset(scenario.id, "train", train),
        Dataset(scenario.id, "calibration", cal_batch, cal_sizes),
        Dataset(scenario.id, "test", test_batch, test_sizes),
    )


# --------------------------------------------------------------------------
# JSON-Lines persistence
# --------------------------------------------------------------------------


def save_dataset(dataset: Dataset, path) -> None:
    path = Path(path)
    batch = dataset.batch
    with path.open("w", encoding="utf-8") as fh:
        for i in range(len(batch)):
            record = {
                "scenario": dataset.scenario_id,
                "split": dataset.split,
                "init_state": batch.states[i, 0].tolist(),
                "states": batch.states[i].tolist(),
                "mode": int(batch.modes[i]) if batch.modes is not None else 0,
                "seed": int(batch.seeds[i]) if batch.seeds is not None else 0,
            }
            fh.write(json.dumps(record) + "\n")


def load_dataset(path, expect_scenario: str | None = None) -> Dataset:
    """Read one split back.  Calibration/test records are grouped by runs of
    consecutive identical `init_state` values (the writer keeps each group
    contiguous)."""
    path = Path(path)
    states, modes, seeds = [], [], []
    scenario_id = split = None
    group_sizes: list[int] = []
    prev_init = None
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{line_no}: not valid JSON ({e})") from None
            if scenario_id is None:
                scenario_id, split = rec["scenario"], rec["split"]
            elif rec["scenario"] != scenario_id or rec["split"] != split:
                raise ValueError(f"{path}:{line_no}: mixed scenario/split in one file")
            states.append(np.asarray(rec["states"], dtype=np.float64))
            modes.append(rec["mode"])
            seeds.append(rec["seed"])
            init = rec["init_state"]
            if prev_init is not None and init == prev_init:
                group_sizes[-1] += 1
            else:
                group_sizes.append(1)
            prev_init = init
    if scenario_id is None:
        raise ValueError(f"{path}: empty dataset file")
    if expect_scenario is not None and scenario_id != expect_scenario:
        raise ValueError(f"{path}: contains {scenario_id!r}, expected {expect_scenario!r}")
    get_scenario(scenario_id)  # validates the id
    batch = TrajectoryBatch(
        np.stack(states),
        seeds=np.array(seeds, dtype=np.uint64),
        modes=np.array(modes, dtype=np.int64),
    )
    sizes = None if split == "train" else np.array(group_sizes, dtype=np.int64)
    return Dataset(scenario_id, split, batch, sizes)


# --------------------------------------------------------------------------
# Flat binary container: magic, version, n, H, count header then row-major
# little-endian f64 payload.
# --------------------------------------------------------------------------

_MAGIC = b"TRJBATCH"
_VERSION = 1
_HEADER = struct.Struct("<8sIIIQ")  # magic, version, n, H, count


def save_states_binary(states: np.ndarray, path) -> None:
    states = np.ascontiguousarray(states, dtype=np.float64)
    if states.ndim != 3:
        raise ValueError(f"expected (count, H, n) states, got shape {states.shape}")
    count, H, n = states.shape
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, n, H, count))
        fh.write(states.astype("<f8", copy=False).tobytes())


def load_states_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, H, count = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + count * H * n * 8
    if len(raw) != expected:
        raise ValueError(f"{path}: payload size {len(raw)} != expected {expected}")
    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    return payload.reshape(count, H, n).astype(np.float64)
