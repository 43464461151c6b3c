import math

import numpy as np
import pytest

from stlcast.conformal import PredictionInterval, build_monitor
from stlcast.evaluation import (
    bootstrap_evaluate,
    coverage,
    emit_report,
    eqr_width,
    load_report,
    union_width,
)
from stlcast.modes import ConstantModePredictor
from stlcast.rng import substream, substream_seed
from stlcast.scenarios import Dataset
from stlcast.stl import parse_formula
from stlcast.surrogate import ResamplePool
from stlcast.trajectories import TrajectoryBatch

# same toy process as the conformal tests: robustness = 20 - y
TOY_PHI = parse_formula("G[1,2](x0 < 20)", 1)


def _toy_trajectories(rng, inits, per_state):
    rows = []
    for s0 in inits:
        for v in rng.normal(size=per_state):
            rows.append([[s0], [s0 + v], [s0 + v]])
    return np.asarray(rows, dtype=np.float64)


def _toy_dataset(split, rng, n_states, per_state):
    inits = rng.uniform(0.0, 10.0, size=n_states)
    return Dataset(
        scenario_id="toy",
        split=split,
        batch=TrajectoryBatch(_toy_trajectories(rng, inits, per_state)),
        group_sizes=np.full(n_states, per_state),
    )


@pytest.fixture(scope="module")
def toy_setup():
    rng = substream(900)
    pool = _toy_trajectories(rng, rng.uniform(0.0, 10.0, size=300), 1)
    surrogate = ResamplePool(pool, k_nn=300, scenario_id="toy")
    cal = _toy_dataset("calibration", rng, 30, 10)
    test = _toy_dataset("test", rng, 20, 15)
    return surrogate, cal, test


# --- metric units -----------------------------------------------------------


def _iv(lo, hi, **kw):
    return PredictionInterval(lo, hi, **kw)


def test_coverage_single_state_counting():
    rob = np.arange(30.0)  # intervals cover 27 of 30
    cpis = [[_iv(0.0, 26.0, mode=1)]]
    res = coverage(cpis, [rob], [np.ones(30, dtype=int)])
    assert res.per_mode == (0.9,)
    assert res.marginal == 0.9


def test_coverage_infinite_interval_is_one():
    cpis = [[_iv(-math.inf, math.inf, mode=1, degenerate=True)]]
    res = coverage(cpis, [np.array([1e12, -1e12])], [np.array([1, 1])])
    assert res.per_mode == (1.0,)


def test_coverage_state_averaged_not_pooled():
    # 4/5 covered at state one, 10/10 at state two: 0.9 despite 14/15 pooled
    cpis = [[_iv(0.0, 3.0, mode=1)], [_iv(0.0, 9.0, mode=1)]]
    rob = [np.arange(5.0), np.arange(10.0)]
    labels = [np.ones(5, dtype=int), np.ones(10, dtype=int)]
    res = coverage(cpis, rob, labels)
    assert res.per_mode == (0.9,)
    assert res.marginal == 0.9


def test_coverage_skips_states_without_the_mode():
    cpis = [[_iv(0, 1, mode=1), _iv(0, 1, mode=2)], [_iv(0, 1, mode=1), _iv(5, 6, mode=2)]]
    rob = [np.array([0.5]), np.array([5.5])]
    labels = [np.array([1]), np.array([2])]
    res = coverage(cpis, rob, labels)
    assert res.per_mode == (1.0, 1.0)
    assert res.contributing_states == (1, 1)


def test_coverage_misaligned_inputs():
    with pytest.raises(ValueError):
        coverage([[_iv(0, 1)]], [np.array([0.0])], [])
    with pytest.raises(ValueError):
        coverage([], [], [])


def test_union_width_examples():
    assert union_width([(0, 2), (1, 4), (6, 7)]) == 5.0
    assert union_width([(0, 1), (2, 3), (4, 5)]) == 3.0
    assert union_width([(-math.inf, math.inf)]) == math.inf
    assert union_width([_iv(0.0, 2.0), _iv(1.0, 4.0)]) == 4.0


def test_eqr_width_examples():
    assert eqr_width([float(v) for v in range(1, 101)], 0.1) == 90.0
    assert eqr_width([7.0], 0.5) == 0.0
    assert eqr_width([3.0] * 10, 0.1) == 0.0
    with pytest.raises(ValueError):
        eqr_width([], 0.1)


def test_wider_intervals_never_lower_coverage():
    rng = substream(5)
    rob = [rng.normal(size=12) for _ in range(6)]
    labels = [rng.integers(1, 3, size=12) for _ in range(6)]
    cpis = [
        [_iv(-0.5, 0.5, mode=1), _iv(-0.2, 0.9, mode=2)] for _ in range(6)
    ]
    wider = [
        [_iv(iv.lo - 0.4, iv.hi + 0.4, mode=iv.mode) for iv in row] for row in cpis
    ]
    base = coverage(cpis, rob, labels)
    grown = coverage(wider, rob, labels)
    for a, b in zip(base.per_mode, grown.per_mode):
        assert b >= a
    assert grown.marginal >= base.marginal


# --- bootstrap protocol -----------------------------------------------------


def test_plain_round_taus_match_direct_monitor(toy_setup):
    surrogate, cal, test = toy_setup
    report = bootstrap_evaluate(
        surrogate,
        ConstantModePredictor(),
        TOY_PHI,
        cal,
        test,
        alpha=0.2,
        k_samples=50,
        rounds=1,
        with_replacement=False,
        seed=3,
    )
    monitor = build_monitor(
        surrogate, ConstantModePredictor(), cal, TOY_PHI, 0.2, 50, substream_seed(3, 0)
    )
    assert report.per_mode_tau == (monitor.records[0].tau,)
    assert report.rounds == 1 and report.cal_draw == cal.n_groups


def test_report_is_deterministic(toy_setup):
    surrogate, cal, test = toy_setup
    kw = dict(alpha=0.2, k_samples=40, rounds=3, cal_draw=20, seed=9)
    a = bootstrap_evaluate(surrogate, ConstantModePredictor(), TOY_PHI, cal, test, **kw)
    b = bootstrap_evaluate(surrogate, ConstantModePredictor(), TOY_PHI, cal, test, **kw)
    assert a == b


def test_bootstrap_rounds_vary_but_stay_close(toy_setup):
    surrogate, cal, test = toy_setup
    report = bootstrap_evaluate(
        surrogate,
        ConstantModePredictor(),
        TOY_PHI,
        cal,
        test,
        alpha=0.2,
        k_samples=60,
        rounds=8,
        seed=1,
    )
    taus = [t[0] for t in report.traces["per_mode_tau"]]
    assert len(set(taus)) > 1  # resampling actually varies the threshold
    assert report.marginal_coverage >= 0.7
    covs = report.traces["marginal_coverage"]
    assert max(covs) - min(covs) < 0.3


def test_report_shapes_and_sanity(toy_setup):
    surrogate, cal, test = toy_setup
    report = bootstrap_evaluate(
        surrogate,
        ConstantModePredictor(),
        TOY_PHI,
        cal,
        test,
        alpha=0.2,
        k_samples=50,
        rounds=2,
        seed=4,
    )
    assert len(report.per_mode_coverage) == 1
    assert 0.0 <= report.marginal_coverage <= 1.0
    assert report.efficiency is not None and report.efficiency > 0
    assert report.conservativeness == report.efficiency - report.eqr
    assert report.baseline_width is not None
    assert report.test_states == test.n_groups
    assert len(report.plot_intervals) == test.n_groups * 1
    assert len(report.plot_robustness) == len(test)
    # the G=1 union and the baseline are the same interval family here
    assert abs(report.baseline_coverage - report.marginal_coverage) < 1e-12


def test_invalid_arguments(toy_setup):
    surrogate, cal, test = toy_setup
    with pytest.raises(ValueError):
        bootstrap_evaluate(
            surrogate, ConstantModePredictor(), TOY_PHI, cal, test,
            alpha=0.2, k_samples=10, rounds=0,
        )
    with pytest.raises(ValueError):
        bootstrap_evaluate(
            surrogate, ConstantModePredictor(), TOY_PHI, cal, test,
            alpha=0.2, k_samples=10, cal_draw=cal.n_groups + 1, with_replacement=False,
        )


# --- emission ---------------------------------------------------------------


@pytest.fixture(scope="module")
def small_report(toy_setup):
    surrogate, cal, test = toy_setup
    return bootstrap_evaluate(
        surrogate,
        ConstantModePredictor(),
        TOY_PHI,
        cal,
        test,
        alpha=0.2,
        k_samples=30,
        rounds=2,
        seed=6,
    )


def test_report_roundtrip(small_report, tmp_path):
    paths = emit_report(small_report, tmp_path)
    assert load_report(paths["report"]) == small_report


def test_report_byte_stability(small_report, tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    pa = emit_report(small_report, tmp_path / "a")
    pb = emit_report(small_report, tmp_path / "b")
    for key in pa:
        assert pa[key].read_bytes() == pb[key].read_bytes()


def test_csv_shapes(small_report, tmp_path):
    paths = emit_report(small_report, tmp_path)
    interval_lines = paths["intervals"].read_text().strip().split("\n")
    assert interval_lines[0] == "state_index,mode,lo,hi,degenerate"
    assert len(interval_lines) - 1 == small_report.test_states * small_report.mode_count
    rob_lines = paths["robustness"].read_text().strip().split("\n")
    assert rob_lines[0] == "state_index,trajectory_index,robustness,mode,covered"
    assert len(rob_lines) - 1 == small_report.test_trajectories


def test_missing_directory_fails_without_partial_file(small_report, tmp_path):
    target = tmp_path / "nope" / "deeper"
    with pytest.raises(FileNotFoundError):
        emit_report(small_report, target)
    assert not target.exists()


def test_infinite_metrics_serialize(toy_setup, tmp_path):
    surrogate, cal, test = toy_setup
    # tiny calibration: tau goes infinite, efficiency disappears
    tiny = Dataset(
        scenario_id="toy",
        split="calibration",
        batch=cal.group(0),
        group_sizes=np.array([cal.group_sizes[0]]),
    )
    report = bootstrap_evaluate(
        surrogate, ConstantModePredictor(), TOY_PHI, tiny, test,
        alpha=0.01, k_samples=20, seed=0,
    )
    assert report.per_mode_tau == (math.inf,)
    assert report.efficiency is None and report.conservativeness is None
    assert report.marginal_coverage == 1.0
    assert report.infinite_union_states == report.test_states
    paths = emit_report(report, tmp_path)
    assert load_report(paths["report"]) == report
    assert ",-inf,inf,1" in paths["intervals"].read_text()