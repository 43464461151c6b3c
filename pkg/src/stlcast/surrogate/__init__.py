"""Generative trajectory surrogates: conditional diffusion + resampling baseline."""

from .checkpoint import (
    load_diffusion_model,
    read_container,
    save_diffusion_model,
    write_container,
)
from .diffusion import (
    DiffusionModel,
    NotFittedError,
    SurrogateError,
    TrainHyper,
    TrainingDivergedError,
    new_diffusion_model,
    sample_trajectories,
    train_denoiser,
)
from .net import Mlp, silu, silu_grad, sinusoidal_embedding
from .optim import Adam
from .resample import ResamplePool, resample_surrogate
from .schedule import NoiseSchedule, forward_diffuse, linear_schedule

__all__ = [
    "Adam",
    "DiffusionModel",
    "Mlp",
    "NoiseSchedule",
    "NotFittedError",
    "ResamplePool",
    "SurrogateError",
    "TrainHyper",
    "TrainingDivergedError",
    "forward_diffuse",
    "linear_schedule",
    "load_diffusion_model",
    "new_diffusion_model",
    "read_container",
    "resample_surrogate",
    "sample_trajectories",
    "save_diffusion_model",
    "silu",
    "silu_grad",
    "sinusoidal_embedding",
    "train_denoiser",
    "write_container",
]
