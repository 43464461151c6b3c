"""Fully connected denoiser network with hand-rolled reverse accumulation.

Nothing here knows about diffusion; it is a plain MLP y = W_L a_{L-1} + b_L
with SiLU hidden activations, exposing forward (with cache) and backward
(returning per-parameter gradients).  Gradients are validated against
central finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Mlp", "silu", "silu_grad", "sinusoidal_embedding"]


def silu(x: np.ndarray) -> np.ndarray:
    # exp may overflow for very negative x; the quotient then hits the
    # correct limit 0, so only the warning needs silencing
    with np.errstate(over="ignore"):
        return x / (1.0 + np.exp(-x))


def silu_grad(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


def sinusoidal_embedding(tau, dim: int, max_period: float = 10_000.0) -> np.ndarray:
    """(len(tau), dim) embedding; half sine, half cosine, log-spaced periods."""
    if dim % 2 != 0:
        raise ValueError(f"embedding dimension must be even, got {dim}")
    tau = np.atleast_1d(np.asarray(tau, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-np.log(max_period) * np.arange(half) / max(half - 1, 1))
    angles = tau[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


class Mlp:
    """Layer sizes e.g. (in, 256, 256, 256, out); SiLU between layers."""

    def __init__(self, sizes: tuple[int, ...], rng: np.random.Generator):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (output, cache); cache holds the pre-activations needed
        for backward plus the layer inputs."""
        cache = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if i < last:
                cache.append(z)
                h = silu(z)
                cache.append(h)
            else:
                h = z
        return h, cache

    def backward(self, grad_out: np.ndarray, cache: list[np.ndarray]) -> list[np.ndarray]:
        """Gradient of a scalar loss w.r.t. every parameter, same order as
        `params`, given d(loss)/d(output)."""
        grads: list[np.ndarray] = [np.empty(0)] * (2 * len(self.weights))
        g = grad_out
        for i in range(len(self.weights) - 1, -1, -1):
            inp = cache[2 * i]
            grads[2 * i] = inp.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.weights[i].T) * silu_grad(cache[2 * i - 1])
        return grads

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]
