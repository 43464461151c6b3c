"""Calibrated prediction intervals for robustness values.

The pipeline: sample K trajectories from a surrogate at an initial state,
split them by predicted mode, take empirical quantiles of the per-mode
robustness values, then widen (or tighten) each interval by a threshold
calibrated on held-out real trajectories of that mode.  The threshold is
the conservative-rank empirical quantile of nonconformity scores, with a
+infinity augmentation point so small calibration sets degrade to infinite
intervals instead of invalid ones.

A single-mode predictor collapses the whole machinery to plain split
conformalized quantile regression, which doubles as the mode-agnostic
baseline.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .stl import Formula, HorizonError, lookahead, robustness_batch, to_text

__all__ = [
    "PredictionInterval",
    "CalibrationRecord",
    "CalibratedMonitor",
    "MonitorResult",
    "SampleCache",
    "empirical_quantile",
    "nonconformity_score",
    "calibrate_threshold",
    "conformalized_interval",
    "mode_prediction_interval",
    "mode_intervals",
    "build_monitor",
    "monitor_state",
    "merge_intervals",
    "save_calibration",
    "load_calibration",
    "cpi_json_line",
]

# guard against float fuzz when p*m lands on an integer (0.9*20 = 18.000...04)
_RANK_EPS = 1e-9


def empirical_quantile(values, p: float) -> float:
    """Order statistic v_(max(1, ceil(p*m))) of the sorted values."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("cannot take a quantile of an empty list")
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p must be in [0, 1], got {p}")
    if np.isnan(arr).any():
        raise ValueError("values contain NaN")
    idx = max(1, math.ceil(p * arr.size - _RANK_EPS))
    return float(np.sort(arr)[idx - 1])


@dataclass(frozen=True)
class PredictionInterval:
    """[lo, hi] for the robustness of a property, tied to one mode (or the
    mode-agnostic pipeline).  `k_used` counts the surrogate samples that
    survived the mode filter; `degenerate` marks the infinite fallback;
    `collapsed` marks a negative threshold that crossed the endpoints."""

    lo: float
    hi: float
    mode: int | str = "agnostic"
    k_used: int = 0
    cal_size: int | None = None
    degenerate: bool = False
    collapsed: bool = False

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints cannot be NaN")
        if self.lo > self.hi:
            raise ValueError(f"lo {self.lo} > hi {self.hi}")
        if self.degenerate and not (self.lo == -math.inf and self.hi == math.inf):
            raise ValueError("degenerate intervals are (-inf, inf) by definition")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, t: float) -> bool:
        return self.lo <= t <= self.hi


def nonconformity_score(interval: PredictionInterval, t: float) -> float:
    """max(lo - t, t - hi); negative iff t lies strictly inside.  A
    degenerate interval covers everything, hence score -inf."""
    if math.isnan(t):
        raise ValueError("robustness is NaN")
    if interval.degenerate:
        return -math.inf
    return max(interval.lo - t, t - interval.hi)


def calibrate_threshold(scores, alpha: float) -> float:
    """Conservative-rank (1-alpha) quantile with a +inf augmentation point:
    rank ceil((n+1)(1-alpha)); past the last score means +inf."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if np.isnan(arr).any():
        raise ValueError("scores contain NaN")
    n = arr.size
    rank = math.ceil((n + 1) * (1.0 - alpha) - _RANK_EPS)
    if rank > n:
        return math.inf
    return float(np.sort(arr)[rank - 1])


def conformalized_interval(
    interval: PredictionInterval, tau: float, cal_size: int | None = None
) -> PredictionInterval:
    """[lo - tau, hi + tau].  tau = +inf (or a degenerate input) yields the
    infinite interval; a negative tau larger than the half-width collapses
    to the midpoint, flagged and warned about."""
    if math.isnan(tau):
        raise ValueError("threshold is NaN")
    n = cal_size if cal_size is not None else interval.cal_size
    if interval.degenerate or tau == math.inf:
        return PredictionInterval(
            -math.inf, math.inf, interval.mode, interval.k_used, n, degenerate=True
        )
    lo, hi = interval.lo - tau, interval.hi + tau
    if lo > hi:
        mid = 0.5 * (interval.lo + interval.hi)
        warnings.warn(
            f"threshold {tau} collapsed the interval for mode {interval.mode}; "
            "reporting its midpoint",
            stacklevel=2,
        )
        return PredictionInterval(mid, mid, interval.mode, interval.k_used, n, collapsed=True)
    return PredictionInterval(lo, hi, interval.mode, interval.k_used, n)


@dataclass
class SampleCache:
    """Keyed trajectory pools so monitoring another property at the same
    state reuses the same surrogate draws instead of sampling again."""

    entries: dict = field(default_factory=dict)
    hits: int = 0
    misses: int = 0

    def fetch(self, surrogate, s0, count: int, seed: int):
        s0 = np.asarray(s0, dtype=np.float64)
        key = (s0.tobytes(), surrogate.fingerprint(), count, seed)
        batch = self.entries.get(key)
        if batch is None:
            self.misses += 1
            batch = surrogate.sample(s0, count, seed)
            self.entries[key] = batch
        else:
            self.hits += 1
        return batch


def _check_horizon(phi: Formula, surrogate) -> None:
    horizon = getattr(surrogate, "horizon", None)
    if horizon is not None and lookahead(phi) > horizon - 1:
        raise HorizonError(
            f"property needs {lookahead(phi) + 1} steps but the surrogate "
            f"produces {horizon}"
        )


def mode_intervals(
    surrogate,
    predictor,
    s0,
    phi: Formula,
    alpha: float,
    k_samples: int,
    seed: int,
    cache: SampleCache | None = None,
) -> list[PredictionInterval]:
    """One surrogate pool at s0, partitioned by predicted mode, quantiles
    at alpha/2 and 1-alpha/2 per mode.  Empty modes give the degenerate
    interval."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if k_samples < 1:
        raise ValueError(f"k_samples must be >= 1, got {k_samples}")
    _check_horizon(phi, surrogate)
    if cache is not None:
        batch = cache.fetch(surrogate, s0, k_samples, seed)
    else:
        batch = surrogate.sample(np.asarray(s0, dtype=np.float64), k_samples, seed)
    labels = predictor.predict_batch(batch.states)
    rob = robustness_batch(phi, batch.states)
    out = []
    for g in range(1, predictor.mode_count + 1):
        vals = rob[labels == g]
        if vals.size == 0:
            out.append(
                PredictionInterval(-math.inf, math.inf, g, 0, degenerate=True)
            )
        else:
            out.append(
                PredictionInterval(
                    empirical_quantile(vals, alpha / 2.0),
                    empirical_quantile(vals, 1.0 - alpha / 2.0),
                    g,
                    int(vals.size),
                )
            )
    return out


def mode_prediction_interval(
    surrogate, predictor, s0, phi, mode: int, alpha, k_samples, seed, cache=None
) -> PredictionInterval:
    if not (1 <= mode <= predictor.mode_count):
        raise ValueError(f"mode must be in [1, {predictor.mode_count}], got {mode}")
    return mode_intervals(surrogate, predictor, s0, phi, alpha, k_samples, seed, cache)[mode - 1]


@dataclass(frozen=True)
class CalibrationRecord:
    """Per-mode nonconformity scores and their calibrated threshold.
    `state_index[i]` names the calibration state score i came from, which
    is what lets re-calibration resample states without re-sampling the
    surrogate."""

    mode: int | str
    tau: float
    alpha: float
    scores: tuple[float, ...] | None = None  # None when elided on disk
    state_index: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.scores is not None and self.state_index is not None:
            if len(self.scores) != len(self.state_index):
                raise ValueError("scores and state_index lengths differ")

    @property
    def n(self) -> int:
        return 0 if self.scores is None else len(self.scores)


@dataclass(frozen=True)
class CalibratedMonitor:
    phi: Formula
    surrogate: object
    predictor: object
    records: tuple[CalibrationRecord, ...]
    alpha: float
    k_samples: int
    cal_seed: int

    @property
    def mode_count(self) -> int:
        return len(self.records)

    def tau(self, mode: int) -> float:
        return self.records[mode - 1].tau


def build_monitor(
    surrogate,
    predictor,
    cal,
    phi: Formula,
    alpha: float,
    k_samples: int,
    seed: int,
    cache: SampleCache | None = None,
) -> CalibratedMonitor:
    """Scores every calibration trajectory against the interval of its own
    predicted mode at its initial state, then calibrates one threshold per
    mode.  Modes never seen in calibration get tau = +inf rather than an
    error."""
    from .rng import substream_seed

    mode_count = predictor.mode_count
    scores: list[list[float]] = [[] for _ in range(mode_count)]
    state_idx: list[list[int]] = [[] for _ in range(mode_count)]
    for j, group in enumerate(cal.groups()):
        s0 = group.states[0, 0, :]
        intervals = mode_intervals(
            surrogate, predictor, s0, phi, alpha, k_samples, substream_seed(seed, j), cache
        )
        true_rob = robustness_batch(phi, group.states)
        labels = predictor.predict_batch(group.states)
        for g, t in zip(labels, true_rob):
            scores[g - 1].append(nonconformity_score(intervals[g - 1], float(t)))
            state_idx[g - 1].append(j)
    records = tuple(
        CalibrationRecord(
            mode=g + 1,
            tau=calibrate_threshold(scores[g], alpha),
            alpha=alpha,
            scores=tuple(scores[g]),
            state_index=tuple(state_idx[g]),
        )
        for g in range(mode_count)
    )
    return CalibratedMonitor(phi, surrogate, predictor, records, alpha, k_samples, seed)


@dataclass(frozen=True)
class MonitorResult:
    intervals: tuple[PredictionInterval, ...]  # one per mode
    union: tuple[tuple[float, float], ...]  # disjoint, ascending

    @property
    def union_width(self) -> float:
        return sum(hi - lo for lo, hi in self.union)


def monitor_state(
    monitor: CalibratedMonitor, s0, seed: int, cache: SampleCache | None = None
) -> MonitorResult:
    """Fresh surrogate pool at s0, one calibrated interval per mode, plus
    the disjoint union of all of them."""
    base = mode_intervals(
        monitor.surrogate,
        monitor.predictor,
        s0,
        monitor.phi,
        monitor.alpha,
        monitor.k_samples,
        seed,
        cache,
    )
    cpis = tuple(
        conformalized_interval(iv, rec.tau, cal_size=rec.n)
        for iv, rec in zip(base, monitor.records)
    )
    union = merge_intervals([(c.lo, c.hi) for c in cpis])
    return MonitorResult(cpis, union)


def merge_intervals(pairs) -> tuple[tuple[float, float], ...]:
    """Disjoint ascending union of closed intervals; touching endpoints
    merge."""
    items = sorted((float(lo), float(hi)) for lo, hi in pairs)
    merged: list[tuple[float, float]] = []
    for lo, hi in items:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return tuple(merged)


# --- persistence ------------------------------------------------------------

_FORMAT_VERSION = 1
_SCORE_CAP = 10_000


def _num_out(x: float):
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return float(x)


def _num_in(x) -> float:
    return float(x)  # float("inf") / float("-inf") parse the strings


def save_calibration(monitor: CalibratedMonitor, path, score_cap: int = _SCORE_CAP) -> None:
    """Thresholds always; raw scores only below the size cap."""
    records = []
    for rec in monitor.records:
        entry = {"mode": rec.mode, "n": rec.n, "tau": _num_out(rec.tau)}
        if rec.scores is not None and len(rec.scores) <= score_cap:
            entry["scores"] = [_num_out(s) for s in rec.scores]
            entry["state_index"] = list(rec.state_index) if rec.state_index else []
        records.append(entry)
    doc = {
        "format_version": _FORMAT_VERSION,
        "property": to_text(monitor.phi),
        "alpha": monitor.alpha,
        "k_samples": monitor.k_samples,
        "cal_seed": monitor.cal_seed,
        "surrogate": monitor.surrogate.fingerprint(),
        "mode_count": monitor.mode_count,
        "records": records,
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_calibration(path) -> tuple[dict, list[CalibrationRecord]]:
    """Returns the metadata and the per-mode records; the surrogate and
    predictor handles must be re-wired by the caller."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != _FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported calibration format {doc.get('format_version')}")
    records = []
    for entry in doc["records"]:
        scores = entry.get("scores")
        records.append(
            CalibrationRecord(
                mode=entry["mode"],
                tau=_num_in(entry["tau"]),
                alpha=doc["alpha"],
                scores=None if scores is None else tuple(_num_in(s) for s in scores),
                state_index=None
                if scores is None
                else tuple(int(i) for i in entry.get("state_index", [])),
            )
        )
    return doc, records


def cpi_json_line(s0, interval: PredictionInterval, tau: float) -> str:
    rec = {
        "s0": [float(v) for v in np.asarray(s0, dtype=np.float64).ravel()],
        "mode": interval.mode,
        "lo": _num_out(interval.lo),
        "hi": _num_out(interval.hi),
        "tau": _num_out(tau),
        "K_mode": interval.k_used,
        "degenerate": interval.degenerate,
    }
    return json.dumps(rec, sort_keys=True)
