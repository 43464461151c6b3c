import numpy as np
import pytest

from stlcast.rng import substream, substream_seed
from stlcast.scenarios import SplitSizes, generate_dataset, get_scenario
from stlcast.surrogate import (
    DiffusionModel,
    NoiseSchedule,
    NotFittedError,
    TrainHyper,
    TrainingDivergedError,
    forward_diffuse,
    load_diffusion_model,
    new_diffusion_model,
    sample_trajectories,
    save_diffusion_model,
    train_denoiser,
)


@pytest.fixture(scope="module")
def small_signal_data():
    sc = get_scenario("Signal")
    train, _, _ = generate_dataset(sc, SplitSizes(64, 1, 1, 1, 1), seed=77)
    return train


def tiny_model(seed=3):
    # barely trained scaled-down model, enough for sampling-path tests
    return new_diffusion_model("Signal", 1, 45, seed=seed, hidden=(32, 32))


def test_new_model_shapes():
    model = new_diffusion_model("Signal", 1, 45, seed=0)
    assert model.suffix_dim == 44
    assert model.net.sizes == (44 + 16 + 1, 256, 256, 256, 44)
    assert model.trained_epochs == 0
    with pytest.raises(ValueError):
        new_diffusion_model("x", 2, 1, seed=0)


def test_unfitted_model_refuses_to_sample():
    with pytest.raises(NotFittedError):
        sample_trajectories(tiny_model(), np.array([12.5]), 4, seed=0)


def test_zero_epochs_changes_nothing_but_stats(small_signal_data):
    model = tiny_model()
    before = [p.copy() for p in model.net.params]
    _, trace = train_denoiser(model, small_signal_data.batch, TrainHyper(epochs=0), seed=1)
    assert trace == [] and model.trained_epochs == 0
    for p, q in zip(model.net.params, before):
        np.testing.assert_array_equal(p, q)
    # normalization stats did get fit to the data
    assert not np.allclose(model.suffix_mean, 0.0)
    with pytest.raises(NotFittedError):
        model.sample(np.array([12.5]), 1, seed=0)


def test_loss_descends_on_small_set(small_signal_data):
    model = tiny_model()
    _, trace = train_denoiser(
        model, small_signal_data, TrainHyper(epochs=200, batch_size=64, lr=3e-3), seed=5
    )
    assert len(trace) == 200 and all(np.isfinite(v) for v in trace)
    assert np.mean(trace[-5:]) < 0.5 * np.mean(trace[:5])
    assert model.trained_epochs == 200
    assert model.loss_trace == trace


def test_training_is_deterministic(small_signal_data):
    runs = []
    for _ in range(2):
        model = tiny_model(seed=9)
        _, trace = train_denoiser(
            model, small_signal_data, TrainHyper(epochs=3, batch_size=32, lr=1e-3), seed=4
        )
        runs.append((trace, [p.copy() for p in model.net.params]))
    assert runs[0][0] == runs[1][0]
    for a, b in zip(runs[0][1], runs[1][1]):
        np.testing.assert_array_equal(a, b)


def test_diverging_run_aborts_with_hint(small_signal_data):
    # adaptive steps scale with lr, so forcing an overflow needs an lr near
    # the float64 ceiling; the point is that the guard aborts with advice
    # instead of looping on garbage
    model = tiny_model()
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(TrainingDivergedError, match="lower learning rate"):
            train_denoiser(
                model, small_signal_data, TrainHyper(epochs=5, batch_size=64, lr=1e200), seed=2
            )


def test_shape_mismatch_rejected(small_signal_data):
    model = new_diffusion_model("Signal", 1, 30, seed=0, hidden=(8,))
    with pytest.raises(ValueError, match="bound to"):
        train_denoiser(model, small_signal_data, TrainHyper(epochs=1), seed=0)


def test_forward_marginal_matches_iterated_kernel():
    # applying the one-step kernel tau times reproduces the closed form
    # within Monte Carlo error
    sched = NoiseSchedule(np.array([0.05, 0.1, 0.2, 0.3, 0.4]))
    x0 = np.array([2.0, -1.5])
    draws, tau = 4000, 5
    rng = substream(21)
    x = np.tile(x0, (draws, 1))
    for t in range(tau):
        beta = sched.betas[t]
        x = np.sqrt(1 - beta) * x + np.sqrt(beta) * rng.normal(size=x.shape)
    abar = sched.alphas_bar[tau - 1]
    want_mean, want_std = np.sqrt(abar) * x0, np.sqrt(1 - abar)
    se_mean = want_std / np.sqrt(draws)
    assert np.all(np.abs(x.mean(axis=0) - want_mean) < 3 * se_mean)
    se_var = want_std**2 * np.sqrt(2.0 / (draws - 1))
    assert np.all(np.abs(x.var(axis=0) - want_std**2) < 3 * se_var)
    # and the closed-form sampler has matching moments too
    eps = substream(22).normal(size=(draws, 2))
    closed = forward_diffuse(np.tile(x0, (draws, 1)), tau, eps, sched)
    assert np.all(np.abs(closed.mean(axis=0) - want_mean) < 3 * se_mean)


@pytest.fixture(scope="module")
def fitted_model(small_signal_data):
    model = tiny_model(seed=6)
    train_denoiser(model, small_signal_data, TrainHyper(epochs=30, batch_size=64, lr=1e-3), seed=8)
    return model


def test_sampling_shapes_and_exact_s0(fitted_model):
    s0 = np.array([19.0])
    batch = fitted_model.sample(s0, 7, seed=42)
    assert batch.states.shape == (7, 45, 1)
    # the first row is the conditioning state verbatim, not a reconstruction
    assert np.all(batch.states[:, 0, 0] == 19.0)
    assert np.all(np.isfinite(batch.states))
    expect_seeds = [substream_seed(42, j) for j in range(7)]
    np.testing.assert_array_equal(batch.seeds, np.array(expect_seeds, dtype=np.uint64))


def test_sampling_determinism_and_prefix(fitted_model):
    s0 = np.array([5.0])
    a = fitted_model.sample(s0, 5, seed=1)
    b = fitted_model.sample(s0, 5, seed=1)
    np.testing.assert_array_equal(a.states, b.states)
    c = fitted_model.sample(s0, 2, seed=1)
    # per-sample noise streams: a shorter draw is a prefix of a longer one
    np.testing.assert_array_equal(c.states, a.states[:2])
    d = fitted_model.sample(s0, 5, seed=2)
    assert not np.array_equal(d.states, a.states)


def test_sampling_input_validation(fitted_model):
    with pytest.raises(ValueError):
        fitted_model.sample(np.array([1.0, 2.0]), 3, seed=0)
    with pytest.raises(ValueError):
        fitted_model.sample(np.array([1.0]), 0, seed=0)


def test_fingerprint_tracks_parameters(fitted_model):
    fp = fitted_model.fingerprint()
    assert fp.startswith("diffusion-Signal-")
    untrained = tiny_model(seed=6)
    assert untrained.fingerprint() != fp


def test_checkpoint_roundtrip(fitted_model, tmp_path):
    path = tmp_path / "model.ckpt"
    save_diffusion_model(fitted_model, path)
    loaded = load_diffusion_model(path)
    assert isinstance(loaded, DiffusionModel)
    assert loaded.fingerprint() == fitted_model.fingerprint()
    assert loaded.trained_epochs == fitted_model.trained_epochs
    assert loaded.loss_trace == fitted_model.loss_trace
    np.testing.assert_array_equal(loaded.schedule.betas, fitted_model.schedule.betas)
    s0 = np.array([12.5])
    np.testing.assert_array_equal(
        loaded.sample(s0, 4, seed=3).states, fitted_model.sample(s0, 4, seed=3).states
    )


def test_checkpoint_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint at all")
    with pytest.raises(ValueError):
        load_diffusion_model(bad)
    trunc = tmp_path / "trunc.ckpt"
    save_diffusion_model(
        new_diffusion_model("Signal", 1, 45, seed=0, hidden=(8,)), trunc
    )
    data = trunc.read_bytes()
    trunc.write_bytes(data[: len(data) // 2])
    with pytest.raises(ValueError):
        load_diffusion_model(trunc)
