"""Conditional denoising diffusion surrogate over trajectory suffixes.

The model diffuses the flattened suffix s(1..H-1), z-scored per dimension,
conditioned on s(0) (z-scored, concatenated to the input together with a
sinusoidal embedding of the diffusion step).  Sampling reverses the chain
with the learned noise predictor and prepends s(0) exactly, so every
generated trajectory honors the conditioning contract downstream stages
rely on.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..rng import substream_seed
from ..trajectories import TrajectoryBatch
from .net import Mlp, sinusoidal_embedding
from .optim import Adam
from .schedule import NoiseSchedule, forward_diffuse, linear_schedule

__all__ = [
    "SurrogateError",
    "TrainingDivergedError",
    "NotFittedError",
    "TrainHyper",
    "DiffusionModel",
    "new_diffusion_model",
    "train_denoiser",
    "sample_trajectories",
]


class SurrogateError(Exception):
    pass


class TrainingDivergedError(SurrogateError):
    """Loss became non-finite; usually the learning rate is too high."""


class NotFittedError(SurrogateError):
    """No training run recorded for this model."""


@dataclass(frozen=True)
class TrainHyper:
    epochs: int = 200
    batch_size: int = 512
    lr: float = 5e-4

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError(f"bad hyperparameters {self}")


@dataclass
class DiffusionModel:
    scenario_id: str
    dim: int
    horizon: int
    schedule: NoiseSchedule
    net: Mlp
    emb_dim: int
    suffix_mean: np.ndarray
    suffix_std: np.ndarray
    cond_mean: np.ndarray
    cond_std: np.ndarray
    trained_epochs: int = 0
    loss_trace: list[float] = field(default_factory=list)

    @property
    def suffix_dim(self) -> int:
        return (self.horizon - 1) * self.dim

    def fingerprint(self) -> str:
        """Content hash of parameters + normalization; keys sample caches."""
        h = hashlib.sha256()
        for arr in (*self.net.params, self.suffix_mean, self.suffix_std, self.cond_mean, self.cond_std):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        return f"diffusion-{self.scenario_id}-{h.hexdigest()[:12]}"

    def sample(self, s0, count: int, seed: int) -> TrajectoryBatch:
        return sample_trajectories(self, s0, count, seed)


def new_diffusion_model(
    scenario_id: str,
    dim: int,
    horizon: int,
    seed: int,
    schedule: NoiseSchedule | None = None,
    hidden: tuple[int, ...] = (256, 256, 256),
    emb_dim: int = 16,
) -> DiffusionModel:
    if horizon < 2:
        raise ValueError(f"horizon must be >= 2 to have a suffix, got {horizon}")
    schedule = schedule if schedule is not None else linear_schedule()
    suffix_dim = (horizon - 1) * dim
    sizes = (suffix_dim + emb_dim + dim, *hidden, suffix_dim)
    net = Mlp(sizes, np.random.default_rng(substream_seed(seed, 0)))
    return DiffusionModel(
        scenario_id=scenario_id,
        dim=dim,
        horizon=horizon,
        schedule=schedule,
        net=net,
        emb_dim=emb_dim,
        suffix_mean=np.zeros(suffix_dim),
        suffix_std=np.ones(suffix_dim),
        cond_mean=np.zeros(dim),
        cond_std=np.ones(dim),
    )


def _training_arrays(model: DiffusionModel, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = states.shape[0]
    suffix = states[:, 1:, :].reshape(n, model.suffix_dim)
    x = (suffix - model.suffix_mean) / model.suffix_std
    y = (states[:, 0, :] - model.cond_mean) / model.cond_std
    return x, y


def train_denoiser(
    model: DiffusionModel, train_data, hyper: TrainHyper, seed: int
) -> tuple[DiffusionModel, list[float]]:
    """Minimizes mean squared noise-prediction error over minibatches with
    uniformly drawn steps and Gaussian noise.  Deterministic given seed;
    mutates `model` in place and returns it with the per-epoch loss trace."""
    states = train_data.batch.states if hasattr(train_data, "batch") else train_data.states
    if states.shape[0] < 1:
        raise ValueError("training set is empty")
    if states.shape[1] != model.horizon or states.shape[2] != model.dim:
        raise ValueError(
            f"model is bound to (H={model.horizon}, n={model.dim}), "
            f"got trajectories of shape {states.shape[1:]}"
        )
    # normalization stats come from this training set
    n = states.shape[0]
    suffix = states[:, 1:, :].reshape(n, model.suffix_dim)
    model.suffix_mean = suffix.mean(axis=0)
    model.suffix_std = np.maximum(suffix.std(axis=0), 1e-6)
    model.cond_mean = states[:, 0, :].mean(axis=0)
    model.cond_std = np.maximum(states[:, 0, :].std(axis=0), 1e-6)

    x_all, y_all = _training_arrays(model, states)
    rng = np.random.default_rng(seed)
    adam = Adam(model.net.params, lr=hyper.lr)
    steps = model.schedule.steps
    trace: list[float] = []
    for epoch in range(hyper.epochs):
        perm = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, hyper.batch_size):
            idx = perm[start : start + hyper.batch_size]
            tau = rng.integers(1, steps + 1, size=idx.size)
            eps = rng.normal(size=(idx.size, model.suffix_dim))
            x_tau = forward_diffuse(x_all[idx], tau, eps, model.schedule)
            inp = np.concatenate(
                [x_tau, sinusoidal_embedding(tau, model.emb_dim), y_all[idx]], axis=1
            )
            pred, cache = model.net.forward(inp)
            diff = pred - eps
            loss = float(np.mean(diff * diff))
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {start // hyper.batch_size}; "
                    f"try a lower learning rate than {hyper.lr}"
                )
            grads = model.net.backward(2.0 * diff / diff.size, cache)
            adam.step(model.net.params, grads)
            epoch_losses.append(loss)
        trace.append(float(np.mean(epoch_losses)))
    model.trained_epochs += hyper.epochs
    model.loss_trace.extend(trace)
    return model, trace


def sample_trajectories(model: DiffusionModel, s0, count: int, seed: int) -> TrajectoryBatch:
    """Ancestral reverse recursion tau = steps..1; x^steps and the per-step
    noise come from per-sample RNG streams keyed by (seed, sample index)."""
    if model.trained_epochs <= 0:
        raise NotFittedError("refusing to sample: the model has no recorded training run")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    s0 = np.asarray(s0, dtype=np.float64)
    if s0.shape != (model.dim,):
        raise ValueError(f"s0 must have shape ({model.dim},), got {s0.shape}")

    steps, d = model.schedule.steps, model.suffix_dim
    seeds = np.array([substream_seed(seed, j) for j in range(count)], dtype=np.uint64)
    noise = np.stack(
        [np.random.default_rng(int(sj)).normal(size=(steps, d)) for sj in seeds]
    )
    x = noise[:, 0, :].copy()
    cond = np.tile((s0 - model.cond_mean) / model.cond_std, (count, 1))
    betas, abars = model.schedule.betas, model.schedule.alphas_bar
    for i, tau in enumerate(range(steps, 0, -1)):
        emb = np.tile(sinusoidal_embedding(tau, model.emb_dim), (count, 1))
        eps = model.net(np.concatenate([x, emb, cond], axis=1))
        beta, abar = betas[tau - 1], abars[tau - 1]
        mu = (x - beta / np.sqrt(1.0 - abar) * eps) / np.sqrt(1.0 - beta)
        if tau > 1:
            x = mu + model.schedule.posterior_sigma(tau) * noise[:, i + 1, :]
        else:
            x = mu
    suffix = x * model.suffix_std + model.suffix_mean
    states = np.empty((count, model.horizon, model.dim))
    states[:, 0, :] = s0
    states[:, 1:, :] = suffix.reshape(count, model.horizon - 1, model.dim)
    return TrajectoryBatch(states, seeds=seeds)
