"""Robustness and satisfaction of formulas over discrete-time trajectories.

Evaluation is vectorized over a batch axis: each node yields a robustness
signal of shape (batch, H - lookahead(node)) whose entry [i, t] is the
node's robustness on trajectory i at step t.  Scalar evaluation wraps a
batch of one.

true/false carry robustness +inf/-inf, which makes the explicit derived
nodes (false, Or, F, G) evaluate identically to their desugared core forms.
Satisfaction is the sign of robustness with ties at exactly 0 mapping to
false (predicates are strict g > 0).
"""

from __future__ import annotations

import numpy as np

from ..trajectories import Trajectory, TrajectoryBatch
from .ast import (
    And,
    Eventually,
    Falsity,
    Formula,
    Globally,
    HorizonError,
    Not,
    Or,
    Pred,
    StlError,
    Truth,
    Until,
    lookahead,
    required_dim,
)

__all__ = ["eval_boolean", "eval_robustness", "robustness_batch", "robustness_signal"]


def _window(sig: np.ndarray, a: int, b: int, reduce_fn) -> np.ndarray:
    """Sliding extreme of sig[:, t+a .. t+b] for every valid t."""
    L = sig.shape[1] - b
    out = sig[:, a:a + L].copy()
    for k in range(a + 1, b + 1):
        reduce_fn(out, sig[:, k:k + L], out=out)
    return out


def _until(r1: np.ndarray, r2: np.ndarray, a: int, b: int) -> np.ndarray:
    # out[t] = max over t' in [t+a, t+b] of min(r2[t'], min(r1[t .. t'])),
    # with the inner minimum including t' itself.
    L = min(r1.shape[1], r2.shape[1]) - b
    out = np.empty((r1.shape[0], L), dtype=np.float64)
    for t in range(L):
        runmin = r1[:, t].copy()
        for k in range(t + 1, t + a + 1):
            np.minimum(runmin, r1[:, k], out=runmin)
        best = np.minimum(r2[:, t + a], runmin)
        for tp in range(t + a + 1, t + b + 1):
            np.minimum(runmin, r1[:, tp], out=runmin)
            np.maximum(best, np.minimum(r2[:, tp], runmin), out=best)
        out[:, t] = best
    return out


def _signal(phi: Formula, states: np.ndarray) -> np.ndarray:
    match phi:
        case Truth():
            return np.full(states.shape[:2], np.inf)
        case Falsity():
            return np.full(states.shape[:2], -np.inf)
        case Pred(form):
            return form.g_values(states)
        case Not(child):
            return -_signal(child, states)
        case And(left, right):
            rl, rr = _signal(left, states), _signal(right, states)
            L = min(rl.shape[1], rr.shape[1])
            return np.minimum(rl[:, :L], rr[:, :L])
        case Or(left, right):
            rl, rr = _signal(left, states), _signal(right, states)
            L = min(rl.shape[1], rr.shape[1])
            return np.maximum(rl[:, :L], rr[:, :L])
        case Eventually(child, iv):
            return _window(_signal(child, states), iv.lo, iv.hi, np.maximum)
        case Globally(child, iv):
            return _window(_signal(child, states), iv.lo, iv.hi, np.minimum)
        case Until(left, right, iv):
            return _until(_signal(left, states), _signal(right, states), iv.lo, iv.hi)
    raise TypeError(f"not a formula node: {phi!r}")


def _as_batch(states) -> np.ndarray:
    if isinstance(states, TrajectoryBatch):
        return states.states
    arr = np.asarray(states, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"expected states of shape (batch, H, n), got {arr.shape}")
    return arr


def robustness_signal(phi: Formula, states) -> np.ndarray:
    """Per-step robustness, shape (batch, H - lookahead(phi))."""
    arr = _as_batch(states)
    need = required_dim(phi)
    if arr.shape[2] < need:
        raise StlError(
            f"formula references x{need - 1} but states have dimension {arr.shape[2]}"
        )
    if arr.shape[1] <= lookahead(phi):
        raise HorizonError(
            f"formula looks {lookahead(phi)} steps ahead but horizon is {arr.shape[1]}"
        )
    return _signal(phi, arr)


def robustness_batch(phi: Formula, states, t: int = 0) -> np.ndarray:
    """Robustness of each trajectory in the batch at step t, shape (batch,)."""
    arr = _as_batch(states)
    if t < 0:
        raise ValueError(f"step index must be >= 0, got {t}")
    la = lookahead(phi)
    if t + la > arr.shape[1] - 1:
        raise HorizonError(
            f"evaluation at t={t} needs state index {t + la} "
            f"but the last index is {arr.shape[1] - 1}"
        )
    return robustness_signal(phi, arr)[:, t]


def _single(s) -> np.ndarray:
    if isinstance(s, Trajectory):
        return s.states
    arr = np.asarray(s, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a single trajectory of shape (H, n), got {arr.shape}")
    return arr


def eval_robustness(phi: Formula, s, t: int = 0) -> float:
    """Rob_phi(s, t) for one trajectory (a Trajectory or an (H, n) array)."""
    return float(robustness_batch(phi, _single(s)[None], t)[0])


def eval_boolean(phi: Formula, s, t: int = 0) -> bool:
    """Satisfaction at step t; robustness exactly 0 counts as violation."""
    return eval_robustness(phi, s, t) > 0.0
