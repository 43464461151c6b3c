import numpy as np
import pytest

from stlcast.scenarios import (
    Dataset,
    generate_dataset,
    get_scenario,
    load_dataset,
    load_states_binary,
    save_dataset,
    save_states_binary,
    SplitSizes,
)
from stlcast.trajectories import TrajectoryBatch


@pytest.fixture(scope="module")
def small_splits():
    sc = get_scenario("Crossroad")
    return generate_dataset(sc, SplitSizes(6, 3, 4, 2, 2), seed=77)


class TestJsonl:
    def test_round_trip_exact(self, small_splits, tmp_path):
        for ds in small_splits:
            p = tmp_path / f"{ds.split}.jsonl"
            save_dataset(ds, p)
            back = load_dataset(p)
            assert back.scenario_id == ds.scenario_id
            assert back.split == ds.split
            assert np.array_equal(back.batch.states, ds.batch.states)
            assert np.array_equal(back.batch.modes, ds.batch.modes)
            assert np.array_equal(back.batch.seeds, ds.batch.seeds)

    def test_grouping_recovered(self, small_splits, tmp_path):
        _, cal, _ = small_splits
        p = tmp_path / "cal.jsonl"
        save_dataset(cal, p)
        back = load_dataset(p)
        assert np.array_equal(back.group_sizes, cal.group_sizes)
        np.testing.assert_array_equal(back.group_init_states, cal.group_init_states)

    def test_train_not_grouped(self, small_splits, tmp_path):
        train, _, _ = small_splits
        p = tmp_path / "train.jsonl"
        save_dataset(train, p)
        assert load_dataset(p).group_sizes is None

    def test_record_schema(self, small_splits, tmp_path):
        import json

        train, _, _ = small_splits
        p = tmp_path / "train.jsonl"
        save_dataset(train, p)
        rec = json.loads(p.read_text().splitlines()[0])
        assert set(rec) == {"scenario", "split", "init_state", "states", "mode", "seed"}
        assert rec["scenario"] == "Crossroad" and rec["split"] == "train"
        assert isinstance(rec["mode"], int) and isinstance(rec["seed"], int)
        assert rec["states"][0] == rec["init_state"]

    def test_expected_scenario_enforced(self, small_splits, tmp_path):
        train, _, _ = small_splits
        p = tmp_path / "train.jsonl"
        save_dataset(train, p)
        with pytest.raises(ValueError, match="expected"):
            load_dataset(p, expect_scenario="Signal")

    def test_mixed_file_rejected(self, small_splits, tmp_path):
        train, cal, _ = small_splits
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_dataset(train, pa)
        save_dataset(cal, pb)
        mixed = tmp_path / "mixed.jsonl"
        mixed.write_text(pa.read_text() + pb.read_text())
        with pytest.raises(ValueError, match="mixed"):
            load_dataset(mixed)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "empty.jsonl"
        p.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_dataset(p)

    def test_garbage_line_reported_with_number(self, small_splits, tmp_path):
        train, _, _ = small_splits
        p = tmp_path / "bad.jsonl"
        lines = []
        save_dataset(train, p)
        lines = p.read_text().splitlines()
        lines.insert(2, "{not json")
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError, match=":3:"):
            load_dataset(p)


class TestBinary:
    def test_round_trip(self, tmp_path):
        states = np.random.default_rng(0).normal(size=(7, 5, 3))
        p = tmp_path / "states.bin"
        save_states_binary(states, p)
        np.testing.assert_array_equal(load_states_binary(p), states)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.bin"
        p.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
        with pytest.raises(ValueError, match="magic"):
            load_states_binary(p)

    def test_truncated(self, tmp_path):
        states = np.zeros((2, 3, 1))
        p = tmp_path / "t.bin"
        save_states_binary(states, p)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(ValueError, match="size"):
            load_states_binary(p)

    def test_bad_shape_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_states_binary(np.zeros((3, 4)), tmp_path / "y.bin")


class TestDatasetContainer:
    def test_group_size_sum_checked(self):
        batch = TrajectoryBatch(np.zeros((4, 2, 1)))
        with pytest.raises(ValueError):
            Dataset("Signal", "calibration", batch, group_sizes=[3, 3])

    def test_unknown_split_rejected(self):
        batch = TrajectoryBatch(np.zeros((1, 2, 1)))
        with pytest.raises(ValueError):
            Dataset("Signal", "validation", batch)
