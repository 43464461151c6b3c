import copy
import warnings

import numpy as np
import pytest

from stlcast.modes import (
    ClassifierHyper,
    ConstantModePredictor,
    ExactModePredictor,
    kmeans_modes,
    load_classifier,
    partition_by_mode,
    predict_mode,
    save_classifier,
    train_classifier,
)
from stlcast.scenarios import SplitSizes, generate_dataset, get_scenario
from stlcast.trajectories import TrajectoryBatch


@pytest.fixture(scope="module")
def signal_train():
    sc = get_scenario("Signal")
    train, _, _ = generate_dataset(sc, SplitSizes(400, 1, 1, 1, 1), seed=5)
    return sc, train


def test_exact_predictor_delegates(signal_train):
    sc, data = signal_train
    pred = ExactModePredictor(sc)
    assert pred.mode_count == 3
    labels = pred.predict_batch(data.batch.states)
    np.testing.assert_array_equal(labels, data.batch.modes)
    assert predict_mode(pred, data.batch[0]) == int(data.batch.modes[0])
    with pytest.raises(ValueError):
        pred.predict_batch(np.zeros((2, 45, 3)))


def test_constant_predictor():
    pred = ConstantModePredictor()
    assert pred.mode_count == 1
    np.testing.assert_array_equal(pred.predict_batch(np.zeros((4, 5, 2))), np.ones(4))


def test_classifier_reaches_high_accuracy(signal_train):
    sc, data = signal_train
    clf, trace = train_classifier(data, sc.mode_count, ClassifierHyper(), seed=0)
    assert len(trace) == ClassifierHyper().epochs
    assert trace[-1] >= 0.95
    exact = ExactModePredictor(sc).predict_batch(data.batch.states)
    agree = np.mean(clf.predict_batch(data.batch.states) == exact)
    assert agree >= 0.97


def test_classifier_probabilities_normalized(signal_train):
    sc, data = signal_train
    clf, _ = train_classifier(data, sc.mode_count, ClassifierHyper(epochs=50), seed=1)
    probs = clf.probabilities(data.batch.states[:32])
    assert probs.shape == (32, 3)
    assert np.all(probs >= 0)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_zero_epochs_gives_uniform_softmax(signal_train):
    sc, data = signal_train
    clf, trace = train_classifier(data, sc.mode_count, ClassifierHyper(epochs=0), seed=0)
    assert trace == []
    probs = clf.probabilities(data.batch.states[:8])
    np.testing.assert_allclose(probs, 1.0 / 3.0, atol=1e-12)
    # uniform scores tie; prediction falls to the lowest label
    np.testing.assert_array_equal(clf.predict_batch(data.batch.states[:8]), 1)


def test_training_determinism(signal_train):
    sc, data = signal_train
    hyper = ClassifierHyper(epochs=40)
    a, trace_a = train_classifier(data, sc.mode_count, hyper, seed=3)
    b, trace_b = train_classifier(data, sc.mode_count, hyper, seed=3)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert trace_a == trace_b


def test_missing_class_warns():
    states = np.random.default_rng(0).normal(size=(20, 4, 1)).cumsum(axis=1)
    batch = TrajectoryBatch(states, modes=np.ones(20, dtype=np.int64))
    with pytest.warns(UserWarning, match="no training samples for mode"):
        train_classifier(batch, 3, ClassifierHyper(epochs=5), seed=0)


def test_zero_variance_features_dropped():
    rng = np.random.default_rng(1)
    states = rng.normal(size=(30, 5, 2))
    states[:, 0, :] = 7.0  # constant start - two dead features
    labels = (states[:, -1, 0] > 0).astype(np.int64) + 1
    batch = TrajectoryBatch(states, modes=labels)
    with pytest.warns(UserWarning, match="zero-variance"):
        clf, _ = train_classifier(batch, 2, ClassifierHyper(epochs=30), seed=0)
    assert clf.weights.shape[0] == 8
    # prediction still consumes full trajectories
    assert clf.predict_batch(states).shape == (30,)


def test_unlabeled_batch_rejected():
    batch = TrajectoryBatch(np.zeros((4, 3, 1)))
    with pytest.raises(ValueError, match="no mode labels"):
        train_classifier(batch, 2, ClassifierHyper(epochs=1), seed=0)


def test_partition_by_mode_is_a_partition(signal_train):
    sc, data = signal_train
    pred = ExactModePredictor(sc)
    parts = partition_by_mode(pred, data.batch)
    assert len(parts) == 3
    assert sum(len(p) for p in parts) == len(data.batch)
    rebuilt = np.concatenate(
        [p.states for p in parts if len(p)], axis=0
    )
    # order within each part follows the input order
    for g, part in enumerate(parts, start=1):
        idx = np.flatnonzero(data.batch.modes == g)
        np.testing.assert_array_equal(part.states, data.batch.states[idx])
        if part.modes is not None and len(part):
            assert np.all(part.modes == g)
    assert rebuilt.shape[0] == len(data.batch)


def test_partition_empty_batch():
    pred = ConstantModePredictor(mode_count=3)
    empty = TrajectoryBatch(np.zeros((0, 4, 1)))
    parts = partition_by_mode(pred, empty)
    assert [len(p) for p in parts] == [0, 0, 0]


def test_kmeans_recovers_separated_clusters():
    rng = np.random.default_rng(4)
    terminals = np.concatenate(
        [rng.normal(c, 0.3, size=(50, 1)) for c in (0.0, 10.0, 20.0)]
    )
    labels = kmeans_modes(terminals, 3, seed=0)
    want = np.repeat([1, 2, 3], 50)
    assert np.mean(labels == want) > 0.98


def test_classifier_checkpoint_roundtrip(signal_train, tmp_path):
    sc, data = signal_train
    clf, _ = train_classifier(data, sc.mode_count, ClassifierHyper(epochs=60), seed=2)
    path = tmp_path / "clf.ckpt"
    save_classifier(clf, path)
    loaded = load_classifier(path)
    np.testing.assert_array_equal(loaded.weights, clf.weights)
    np.testing.assert_array_equal(loaded.keep, clf.keep)
    assert loaded.accuracy_trace == clf.accuracy_trace
    np.testing.assert_array_equal(
        loaded.predict_batch(data.batch.states), clf.predict_batch(data.batch.states)
    )


def test_classifier_checkpoint_kind_mismatch(tmp_path, signal_train):
    from stlcast.surrogate import new_diffusion_model, save_diffusion_model

    path = tmp_path / "other.ckpt"
    save_diffusion_model(new_diffusion_model("Signal", 1, 45, seed=0, hidden=(8,)), path)
    with pytest.raises(ValueError, match="not a classifier"):
        load_classifier(path)


def test_hyper_validation():
    with pytest.raises(ValueError):
        ClassifierHyper(epochs=-1)
    with pytest.raises(ValueError):
        ClassifierHyper(lr=0.0)


def test_mode_labels_always_in_range(signal_train):
    sc, data = signal_train
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        clf, _ = train_classifier(data, sc.mode_count, ClassifierHyper(epochs=10), seed=7)
    labels = clf.predict_batch(data.batch.states)
    assert labels.min() >= 1 and labels.max() <= sc.mode_count


def test_blob_classifier_separates_distant_classes():
    # two unit-variance blobs six sigma apart; held-out accuracy should be ~1
    rng = np.random.default_rng(7)
    labels = rng.integers(1, 3, size=500)
    centers = np.array([[0.0, 0.0], [6.0, 0.0]])
    pts = centers[labels - 1] + rng.normal(size=(500, 2))
    batch = TrajectoryBatch(states=pts[:, None, :], modes=labels)
    clf, trace = train_classifier(batch, 2, ClassifierHyper(epochs=200, lr=0.05), seed=0)
    assert trace[-1] >= 0.99
    assert predict_mode(clf, centers[0][None, :]) == 1
    assert predict_mode(clf, centers[1][None, :]) == 2


def test_logit_shift_leaves_predictions_unchanged(signal_train):
    # softmax is invariant to adding a constant to every class logit
    sc, data = signal_train
    clf, _ = train_classifier(data, sc.mode_count, ClassifierHyper(epochs=60), seed=3)
    shifted = copy.deepcopy(clf)
    shifted.bias = shifted.bias + 250.0
    x = data.batch.states
    np.testing.assert_array_equal(shifted.predict_batch(x), clf.predict_batch(x))
    np.testing.assert_allclose(shifted.probabilities(x), clf.probabilities(x), atol=1e-12)
