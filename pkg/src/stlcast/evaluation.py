"""Coverage / efficiency metrics and the bootstrap evaluation protocol.

Coverage is state-averaged, not pooled: compute the covered fraction at
each test initial state, then average those fractions.  Efficiency is the
mean width of the disjoint union of the per-mode intervals; infinite
widths are counted separately rather than averaged in.  EQR (empirical
quantile range, the width of the interval holding 1-alpha of the real
robustness values) serves as the efficiency yardstick.

Bootstrapping re-draws calibration initial states with replacement and
re-derives every threshold from the retained per-state scores, so no
round needs fresh surrogate samples.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .conformal import (
    CalibratedMonitor,
    PredictionInterval,
    SampleCache,
    build_monitor,
    calibrate_threshold,
    conformalized_interval,
    empirical_quantile,
    merge_intervals,
    mode_intervals,
)
from .modes import ConstantModePredictor
from .rng import substream, substream_seed
from .scenarios import Dataset
from .stl import Formula, robustness_batch, to_text

__all__ = [
    "CoverageResult",
    "EvalReport",
    "coverage",
    "union_width",
    "eqr_width",
    "bootstrap_evaluate",
    "emit_report",
    "load_report",
]


@dataclass(frozen=True)
class CoverageResult:
    per_mode: tuple  # fraction per mode; None where no state contributed
    marginal: float  # union coverage, state-averaged
    contributing_states: tuple  # states that had >= 1 trajectory of the mode


def _contains(lo: float, hi: float, values: np.ndarray) -> np.ndarray:
    return (values >= lo) & (values <= hi)


def coverage(cpis_per_state, rob_per_state, modes_per_state) -> CoverageResult:
    """cpis_per_state[i] holds the G intervals for test state i;
    rob_per_state[i] / modes_per_state[i] the true robustness values and
    mode labels of that state's trajectories."""
    n_states = len(cpis_per_state)
    if not (n_states == len(rob_per_state) == len(modes_per_state)):
        raise ValueError("per-state inputs are misaligned")
    if n_states == 0:
        raise ValueError("no test states")
    mode_count = len(cpis_per_state[0])
    ratios: list[list[float]] = [[] for _ in range(mode_count)]
    union_ratios = []
    for cpis, rob, labels in zip(cpis_per_state, rob_per_state, modes_per_state):
        rob = np.asarray(rob, dtype=np.float64)
        labels = np.asarray(labels)
        for g in range(1, mode_count + 1):
            sel = labels == g
            if not sel.any():
                continue  # no trajectories of this mode here; no ratio
            iv = cpis[g - 1]
            ratios[g - 1].append(float(np.mean(_contains(iv.lo, iv.hi, rob[sel]))))
        union = merge_intervals([(iv.lo, iv.hi) for iv in cpis])
        inside = np.zeros(rob.size, dtype=bool)
        for lo, hi in union:
            inside |= _contains(lo, hi, rob)
        union_ratios.append(float(np.mean(inside)))
    per_mode = tuple(
        float(np.mean(r)) if r else None for r in ratios
    )
    return CoverageResult(
        per_mode=per_mode,
        marginal=float(np.mean(union_ratios)),
        contributing_states=tuple(len(r) for r in ratios),
    )


def union_width(intervals) -> float:
    """Total length of the disjoint union; any infinite endpoint wins."""
    pairs = [
        (iv.lo, iv.hi) if isinstance(iv, PredictionInterval) else (float(iv[0]), float(iv[1]))
        for iv in intervals
    ]
    if any(math.isinf(lo) or math.isinf(hi) for lo, hi in pairs):
        return math.inf
    return sum(hi - lo for lo, hi in merge_intervals(pairs))


def eqr_width(robustness, alpha: float) -> float:
    """Width of the central interval holding 1-alpha of the values."""
    return empirical_quantile(robustness, 1.0 - alpha / 2.0) - empirical_quantile(
        robustness, alpha / 2.0
    )


def _scores_by_state(monitor: CalibratedMonitor, n_states: int):
    """records' flat score lists regrouped as [mode][state] arrays."""
    out = []
    for rec in monitor.records:
        per_state = [[] for _ in range(n_states)]
        if rec.scores is not None:
            for j, s in zip(rec.state_index, rec.scores):
                per_state[j].append(s)
        out.append([np.asarray(v, dtype=np.float64) for v in per_state])
    return out


@dataclass(frozen=True)
class EvalReport:
    format_version: int
    scenario_id: str
    property_text: str
    surrogate_id: str
    predictor_kind: str
    alpha: float
    k_samples: int
    rounds: int
    cal_draw: int
    with_replacement: bool
    seed: int
    mode_count: int
    cal_states: int
    cal_trajectories: int
    test_states: int
    test_trajectories: int
    per_mode_coverage: tuple
    per_mode_coverage_exact: tuple | None
    marginal_coverage: float
    efficiency: float | None
    infinite_union_states: float
    per_mode_degenerate_states: tuple
    eqr: float
    conservativeness: float | None
    baseline_width: float | None
    baseline_coverage: float
    per_mode_tau: tuple  # final round
    traces: dict
    plot_intervals: tuple  # (state_index, mode, lo, hi, degenerate)
    plot_robustness: tuple  # (state_index, trajectory_index, robustness, mode, covered)


def bootstrap_evaluate(
    surrogate,
    predictor,
    phi: Formula,
    cal: Dataset,
    test: Dataset,
    alpha: float,
    k_samples: int,
    rounds: int = 1,
    cal_draw: int | None = None,
    with_replacement: bool = True,
    seed: int = 0,
    cache: SampleCache | None = None,
) -> EvalReport:
    """Full evaluation: calibrate once retaining per-state scores, then per
    round re-draw calibration states, re-derive thresholds, and score the
    test split.  rounds=1 with the full pool drawn without replacement is
    plain (non-bootstrap) evaluation."""
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    n_cal_states = cal.n_groups
    if cal_draw is None:
        cal_draw = n_cal_states
    if cal_draw < 1 or (not with_replacement and cal_draw > n_cal_states):
        raise ValueError(
            f"cal_draw must be in [1, {n_cal_states}] without replacement, got {cal_draw}"
        )
    cache = cache if cache is not None else SampleCache()
    agnostic = ConstantModePredictor()

    monitor = build_monitor(
        surrogate, predictor, cal, phi, alpha, k_samples, substream_seed(seed, 0), cache
    )
    base_monitor = build_monitor(
        surrogate, agnostic, cal, phi, alpha, k_samples, substream_seed(seed, 0), cache
    )
    scores_by_state = _scores_by_state(monitor, n_cal_states)
    base_scores = _scores_by_state(base_monitor, n_cal_states)[0]

    # test-side surrogate pools and ground truth, sampled once
    per_state = []
    for i, group in enumerate(test.groups()):
        s0 = group.states[0, 0, :]
        test_seed = substream_seed(seed, 1, i)
        base = mode_intervals(surrogate, predictor, s0, phi, alpha, k_samples, test_seed, cache)
        agn = mode_intervals(surrogate, agnostic, s0, phi, alpha, k_samples, test_seed, cache)[0]
        rob = robustness_batch(phi, group.states)
        per_state.append(
            {
                "base": base,
                "agnostic": agn,
                "rob": rob,
                "pred": predictor.predict_batch(group.states),
                "exact": None if group.modes is None else group.modes,
                "eqr": eqr_width(rob, alpha) if rob.size else 0.0,
            }
        )
    eqr = float(np.mean([st["eqr"] for st in per_state]))

    G = predictor.mode_count
    traces: dict[str, list] = {
        "per_mode_coverage": [],
        "marginal_coverage": [],
        "efficiency": [],
        "infinite_union_states": [],
        "per_mode_degenerate_states": [],
        "baseline_width": [],
        "baseline_coverage": [],
        "per_mode_tau": [],
        "baseline_tau": [],
    }
    final = {}
    for r in range(rounds):
        if rounds == 1 and not with_replacement and cal_draw == n_cal_states:
            draw = np.arange(n_cal_states)
        else:
            draw = substream(seed, 2, r).choice(
                n_cal_states, size=cal_draw, replace=with_replacement
            )
        taus = []
        for g in range(G):
            pooled = (
                np.concatenate([scores_by_state[g][j] for j in draw])
                if len(draw)
                else np.empty(0)
            )
            taus.append(calibrate_threshold(pooled, alpha))
        base_tau = calibrate_threshold(np.concatenate([base_scores[j] for j in draw]), alpha)

        cpis_per_state = [
            [conformalized_interval(iv, taus[g]) for g, iv in enumerate(st["base"])]
            for st in per_state
        ]
        agn_per_state = [conformalized_interval(st["agnostic"], base_tau) for st in per_state]

        cov = coverage(
            cpis_per_state, [st["rob"] for st in per_state], [st["pred"] for st in per_state]
        )
        cov_exact = None
        if all(st["exact"] is not None for st in per_state):
            cov_exact = coverage(
                cpis_per_state,
                [st["rob"] for st in per_state],
                [st["exact"] for st in per_state],
            )
        widths = np.array([union_width(cpis) for cpis in cpis_per_state])
        finite = np.isfinite(widths)
        efficiency = float(widths[finite].mean()) if finite.any() else None
        degenerate_counts = tuple(
            int(sum(cpis[g].degenerate for cpis in cpis_per_state)) for g in range(G)
        )
        agn_widths = np.array([iv.width for iv in agn_per_state])
        agn_finite = np.isfinite(agn_widths)
        baseline_width = float(agn_widths[agn_finite].mean()) if agn_finite.any() else None
        baseline_cov = float(
            np.mean(
                [
                    np.mean(_contains(iv.lo, iv.hi, st["rob"]))
                    for iv, st in zip(agn_per_state, per_state)
                ]
            )
        )

        traces["per_mode_coverage"].append(cov.per_mode)
        traces["marginal_coverage"].append(cov.marginal)
        traces["efficiency"].append(efficiency)
        traces["infinite_union_states"].append(int((~finite).sum()))
        traces["per_mode_degenerate_states"].append(degenerate_counts)
        traces["baseline_width"].append(baseline_width)
        traces["baseline_coverage"].append(baseline_cov)
        traces["per_mode_tau"].append(tuple(taus))
        traces["baseline_tau"].append(base_tau)
        final = {
            "cpis": cpis_per_state,
            "cov": cov,
            "cov_exact": cov_exact,
            "taus": tuple(taus),
        }

    def _mean_skipping_none(values):
        kept = [v for v in values if v is not None]
        return float(np.mean(kept)) if kept else None

    per_mode_cov = tuple(
        _mean_skipping_none([row[g] for row in traces["per_mode_coverage"]]) for g in range(G)
    )
    efficiency = _mean_skipping_none(traces["efficiency"])
    baseline_width = _mean_skipping_none(traces["baseline_width"])

    plot_intervals = []
    plot_rob = []
    for i, (st, cpis) in enumerate(zip(per_state, final["cpis"])):
        for g, iv in enumerate(cpis, start=1):
            plot_intervals.append((i, g, iv.lo, iv.hi, iv.degenerate))
        union = merge_intervals([(iv.lo, iv.hi) for iv in cpis])
        for t_idx, (t, m) in enumerate(zip(st["rob"], st["pred"])):
            covered = any(lo <= t <= hi for lo, hi in union)
            plot_rob.append((i, t_idx, float(t), int(m), covered))

    cov_exact = final["cov_exact"]
    return EvalReport(
        format_version=1,
        scenario_id=test.scenario_id,
        property_text=to_text(phi),
        surrogate_id=surrogate.fingerprint(),
        predictor_kind=type(predictor).__name__,
        alpha=alpha,
        k_samples=k_samples,
        rounds=rounds,
        cal_draw=int(cal_draw),
        with_replacement=with_replacement,
        seed=seed,
        mode_count=G,
        cal_states=n_cal_states,
        cal_trajectories=len(cal),
        test_states=test.n_groups,
        test_trajectories=len(test),
        per_mode_coverage=per_mode_cov,
        per_mode_coverage_exact=None if cov_exact is None else cov_exact.per_mode,
        marginal_coverage=float(np.mean(traces["marginal_coverage"])),
        efficiency=efficiency,
        infinite_union_states=float(np.mean(traces["infinite_union_states"])),
        per_mode_degenerate_states=tuple(
            float(np.mean([row[g] for row in traces["per_mode_degenerate_states"]]))
            for g in range(G)
        ),
        eqr=eqr,
        conservativeness=None if efficiency is None else efficiency - eqr,
        baseline_width=baseline_width,
        baseline_coverage=float(np.mean(traces["baseline_coverage"])),
        per_mode_tau=final["taus"],
        traces={k: tuple(v) for k, v in traces.items()},
        plot_intervals=tuple(plot_intervals),
        plot_robustness=tuple(plot_rob),
    )


# --- emission ---------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, float):
        if x == math.inf:
            return "inf"
        if x == -math.inf:
            return "-inf"
        return x
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (np.floating, np.integer)):
        return _jsonable(x.item())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _unjson(x):
    if x == "inf":
        return math.inf
    if x == "-inf":
        return -math.inf
    if isinstance(x, list):
        return tuple(_unjson(v) for v in x)
    if isinstance(x, dict):
        return {k: _unjson(v) for k, v in x.items()}
    return x


def _atomic_write(path: Path, text: str) -> None:
    if not path.parent.is_dir():
        raise FileNotFoundError(f"directory {path.parent} does not exist")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def emit_report(report: EvalReport, directory) -> dict[str, Path]:
    """report.json plus two plot-data CSVs (per-state intervals, per-
    trajectory robustness).  Writes are atomic; no timestamps, so repeated
    runs with equal inputs produce byte-identical files."""
    directory = Path(directory)
    paths = {
        "report": directory / "report.json",
        "intervals": directory / "intervals.csv",
        "robustness": directory / "robustness.csv",
    }
    doc = _jsonable(asdict(report))
    _atomic_write(paths["report"], json.dumps(doc, indent=1, sort_keys=True) + "\n")

    buf = []
    buf.append("state_index,mode,lo,hi,degenerate\n")
    for i, g, lo, hi, degen in report.plot_intervals:
        buf.append(f"{i},{g},{_csv_num(lo)},{_csv_num(hi)},{int(degen)}\n")
    _atomic_write(paths["intervals"], "".join(buf))

    buf = ["state_index,trajectory_index,robustness,mode,covered\n"]
    for i, t_idx, rob, mode, covered in report.plot_robustness:
        buf.append(f"{i},{t_idx},{_csv_num(rob)},{mode},{int(covered)}\n")
    _atomic_write(paths["robustness"], "".join(buf))
    return paths


def _csv_num(x: float) -> str:
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return repr(float(x))


def load_report(path) -> EvalReport:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != 1:
        raise ValueError(f"{path}: unsupported report format {doc.get('format_version')}")
    data = {k: _unjson(v) for k, v in doc.items()}
    # tuple-of-row fields survive as tuples via _unjson; nothing else to fix
    return EvalReport(**data)
