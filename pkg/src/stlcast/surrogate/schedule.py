"""Variance schedule for the denoising diffusion surrogate.

Forward kernel per step: p(x^tau | x^{tau-1}) = N(sqrt(1-beta_tau) x^{tau-1},
beta_tau I).  Iterating it gives the closed-form marginal
x^tau = sqrt(abar_tau) x^0 + sqrt(1-abar_tau) eps with
abar_tau = prod_{i<=tau} (1-beta_i), which is what training uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["NoiseSchedule", "linear_schedule", "forward_diffuse"]


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray  # (steps,), each in (0,1)
    alphas_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ValueError("betas must be a non-empty 1-D array")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ValueError("every beta must lie strictly in (0, 1)")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas_bar", np.cumprod(1.0 - betas))

    @property
    def steps(self) -> int:
        return self.betas.size

    def posterior_sigma(self, tau: int) -> float:
        """Reverse-step noise scale; sigma_1^2 = beta_1 by convention."""
        self._check_tau(tau)
        if tau == 1:
            return float(np.sqrt(self.betas[0]))
        var = self.betas[tau - 1] * (1.0 - self.alphas_bar[tau - 2]) / (1.0 - self.alphas_bar[tau - 1])
        return float(np.sqrt(var))

    def _check_tau(self, tau: int) -> None:
        if not (1 <= tau <= self.steps):
            raise ValueError(f"diffusion step must be in [1, {self.steps}], got {tau}")


def linear_schedule(steps: int = 100, beta_start: float = 1e-4, beta_end: float = 0.1) -> NoiseSchedule:
    """Default schedule; with the default arguments abar at the final step
    is ~7e-3, i.e. the terminal state is near pure noise."""
    return NoiseSchedule(np.linspace(beta_start, beta_end, steps))


def forward_diffuse(x0: np.ndarray, tau, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """Closed-form marginal; tau may be a scalar or a per-row integer array."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ValueError(f"x0 shape {x0.shape} != eps shape {eps.shape}")
    tau_arr = np.asarray(tau)
    if np.any(tau_arr < 1) or np.any(tau_arr > schedule.steps):
        raise ValueError(f"diffusion step must be in [1, {schedule.steps}], got {tau}")
    abar = schedule.alphas_bar[tau_arr - 1]
    if tau_arr.ndim == 1 and x0.ndim == 2:
        abar = abar[:, None]
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps
