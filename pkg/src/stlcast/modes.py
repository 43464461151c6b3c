"""Mode predictors: exact rule-based, learned classifier, and partitioning.

A mode predictor is anything with `mode_count` and `predict_batch(states)`
returning labels in {1..G}.  The learned form is multinomial logistic
regression over flattened, z-scored trajectories; the case-study modes are
geometrically separable, so a convex trainer is adequate and keeps the
pipeline deterministic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .scenarios import Scenario
from .surrogate.checkpoint import read_container, write_container
from .surrogate.optim import Adam
from .trajectories import Trajectory, TrajectoryBatch

__all__ = [
    "ModePredictor",
    "ExactModePredictor",
    "ConstantModePredictor",
    "ModeClassifier",
    "ClassifierHyper",
    "train_classifier",
    "predict_mode",
    "partition_by_mode",
    "kmeans_modes",
    "save_classifier",
    "load_classifier",
]


class ModePredictor(Protocol):
    mode_count: int

    def predict_batch(self, states: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ExactModePredictor:
    """Delegates to the scenario's rule-based mode assignment."""

    scenario: Scenario

    @property
    def mode_count(self) -> int:
        return self.scenario.mode_count

    def predict_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        if states.ndim != 3 or states.shape[2] != self.scenario.dim:
            raise ValueError(
                f"{self.scenario.id} trajectories have dimension {self.scenario.dim}, "
                f"got shape {states.shape}"
            )
        return self.scenario.exact_mode_batch(states)


@dataclass(frozen=True)
class ConstantModePredictor:
    """Single-mode predictor; turns the pipeline mode-agnostic (G = 1)."""

    mode_count: int = 1

    def predict_batch(self, states: np.ndarray) -> np.ndarray:
        return np.ones(np.asarray(states).shape[0], dtype=np.int64)


@dataclass
class ModeClassifier:
    """Multinomial logistic regression on flattened trajectories."""

    weights: np.ndarray  # (n_features, G)
    bias: np.ndarray  # (G,)
    feat_mean: np.ndarray
    feat_std: np.ndarray
    keep: np.ndarray  # boolean mask over raw features (drops zero variance)
    mode_count: int
    horizon: int
    dim: int
    accuracy_trace: list[float] = field(default_factory=list)

    def _features(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        if states.ndim != 3 or states.shape[1] != self.horizon or states.shape[2] != self.dim:
            raise ValueError(
                f"classifier expects (batch, {self.horizon}, {self.dim}) states, got {states.shape}"
            )
        flat = states.reshape(states.shape[0], -1)[:, self.keep]
        return (flat - self.feat_mean) / self.feat_std

    def probabilities(self, states: np.ndarray) -> np.ndarray:
        logits = self._features(states) @ self.weights + self.bias
        logits = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        return exp / exp.sum(axis=1, keepdims=True)

    def predict_batch(self, states: np.ndarray) -> np.ndarray:
        # argmax takes the first maximum, so ties resolve to the lowest label
        return np.argmax(self.probabilities(states), axis=1).astype(np.int64) + 1


@dataclass(frozen=True)
class ClassifierHyper:
    epochs: int = 400
    lr: float = 0.02

    def __post_init__(self):
        if self.epochs < 0 or self.lr <= 0:
            raise ValueError(f"bad hyperparameters {self}")


def train_classifier(
    train_data, mode_count: int, hyper: ClassifierHyper, seed: int
) -> tuple[ModeClassifier, list[float]]:
    """Full-batch cross-entropy minimization; deterministic given seed.
    Returns the classifier and the per-epoch held-out accuracy trace
    (10% split)."""
    batch = train_data.batch if hasattr(train_data, "batch") else train_data
    states, labels = batch.states, batch.modes
    if labels is None:
        raise ValueError("training batch has no mode labels")
    n, horizon, dim = states.shape
    present = np.unique(labels)
    if len(present) < mode_count:
        missing = sorted(set(range(1, mode_count + 1)) - set(present.tolist()))
        warnings.warn(f"no training samples for mode(s) {missing}; proceeding", stacklevel=2)

    flat = states.reshape(n, -1)
    std = flat.std(axis=0)
    keep = std > 0.0
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} zero-variance feature(s)", stacklevel=2)
    flat = flat[:, keep]
    mean, std = flat.mean(axis=0), flat.std(axis=0)
    feats = (flat - mean) / std

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_hold = max(1, n // 10) if n > 1 else 0
    hold, fit = perm[:n_hold], perm[n_hold:]
    x_fit, y_fit = feats[fit], labels[fit] - 1
    x_hold, y_hold = feats[hold], labels[hold] - 1

    clf = ModeClassifier(
        weights=np.zeros((feats.shape[1], mode_count)),
        bias=np.zeros(mode_count),
        feat_mean=mean,
        feat_std=std,
        keep=keep,
        mode_count=mode_count,
        horizon=horizon,
        dim=dim,
    )
    onehot = np.eye(mode_count)[y_fit]
    adam = Adam([clf.weights, clf.bias], lr=hyper.lr)
    trace: list[float] = []
    for _ in range(hyper.epochs):
        logits = x_fit @ clf.weights + clf.bias
        logits -= logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        probs = exp / exp.sum(axis=1, keepdims=True)
        grad_logits = (probs - onehot) / x_fit.shape[0]
        adam.step(
            [clf.weights, clf.bias],
            [x_fit.T @ grad_logits, grad_logits.sum(axis=0)],
        )
        if len(hold):
            pred = np.argmax(x_hold @ clf.weights + clf.bias, axis=1)
            trace.append(float(np.mean(pred == y_hold)))
    clf.accuracy_trace = trace
    return clf, trace


def predict_mode(predictor: ModePredictor, s: Trajectory | np.ndarray) -> int:
    states = s.states if isinstance(s, Trajectory) else np.asarray(s, dtype=np.float64)
    if states.ndim != 2:
        raise ValueError(f"expected a single (H, n) trajectory, got shape {states.shape}")
    label = int(predictor.predict_batch(states[None])[0])
    assert 1 <= label <= predictor.mode_count
    return label


def partition_by_mode(
    predictor: ModePredictor, batch: TrajectoryBatch
) -> list[TrajectoryBatch]:
    """G order-preserving sub-batches; entry g-1 holds the trajectories the
    predictor maps to mode g."""
    if len(batch) == 0:
        return [batch.take(np.empty(0, dtype=np.int64)) for _ in range(predictor.mode_count)]
    labels = predictor.predict_batch(batch.states)
    return [
        batch.take(np.flatnonzero(labels == g))
        for g in range(1, predictor.mode_count + 1)
    ]


def kmeans_modes(
    terminal_states: np.ndarray, mode_count: int, seed: int, iters: int = 50
) -> np.ndarray:
    """Unsupervised mode discovery over terminal states (plain Lloyd
    iterations); returns labels in {1..G}.  Not on the calibrated path;
    provided for datasets without an exact rule."""
    pts = np.asarray(terminal_states, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    rng = np.random.default_rng(seed)
    centers = pts[rng.choice(len(pts), size=mode_count, replace=False)]
    for _ in range(iters):
        d = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2)
        assign = np.argmin(d, axis=1)
        for g in range(mode_count):
            sel = assign == g
            if sel.any():
                centers[g] = pts[sel].mean(axis=0)
    order = np.argsort(centers[:, 0], kind="stable")
    relabel = np.empty(mode_count, dtype=np.int64)
    relabel[order] = np.arange(1, mode_count + 1)
    return relabel[assign]


def save_classifier(clf: ModeClassifier, path) -> None:
    header = {
        "kind": "classifier",
        "mode_count": clf.mode_count,
        "horizon": clf.horizon,
        "dim": clf.dim,
        "accuracy_trace": [float(v) for v in clf.accuracy_trace],
    }
    arrays = [clf.weights, clf.bias, clf.feat_mean, clf.feat_std, clf.keep.astype(np.float64)]
    write_container(path, header, arrays)


def load_classifier(path) -> ModeClassifier:
    header, arrays = read_container(path)
    if header.get("kind") != "classifier":
        raise ValueError(f"{path}: checkpoint holds a {header.get('kind')!r}, not a classifier")
    weights, bias, mean, std, keep = arrays
    return ModeClassifier(
        weights=weights,
        bias=bias,
        feat_mean=mean,
        feat_std=std,
        keep=keep.astype(bool),
        mode_count=int(header["mode_count"]),
        horizon=int(header["horizon"]),
        dim=int(header["dim"]),
        accuracy_trace=[float(v) for v in header["accuracy_trace"]],
    )
