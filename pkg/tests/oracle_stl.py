"""Brute-force robustness oracle plus random formula/trajectory generators.

Written independently of the package's vectorized evaluator: plain Python
recursion, scalar arithmetic, literal max/min over enumerated index sets.
Predicate arithmetic follows the same documented accumulation order
(offset first, then terms in storage order) so results match bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

from stlcast.stl import (
    AffineForm,
    And,
    Eventually,
    Falsity,
    Formula,
    Globally,
    InfNormForm,
    Interval,
    Not,
    Or,
    PairDistanceForm,
    Pred,
    Truth,
    Until,
)


def oracle_lookahead(phi: Formula) -> int:
    if isinstance(phi, (Truth, Falsity, Pred)):
        return 0
    if isinstance(phi, Not):
        return oracle_lookahead(phi.child)
    if isinstance(phi, (And, Or)):
        return max(oracle_lookahead(phi.left), oracle_lookahead(phi.right))
    if isinstance(phi, Until):
        return phi.interval.hi + max(oracle_lookahead(phi.left), oracle_lookahead(phi.right))
    return phi.interval.hi + oracle_lookahead(phi.child)


def _pred_value(form, s) -> float:
    if isinstance(form, AffineForm):
        acc = form.offset + 0.0 * s[0]
        for j, w in enumerate(form.weights):
            acc = acc + w * s[j]
        return acc
    if isinstance(form, InfNormForm):
        m = abs(s[form.indices[0]] - form.center[0])
        for idx, c in zip(form.indices[1:], form.center[1:]):
            m = max(m, abs(s[idx] - c))
        return form.radius - m if form.inside else m - form.radius
    if isinstance(form, PairDistanceForm):
        acc = (s[form.left[0]] - s[form.right[0]]) ** 2
        for a, b in zip(form.left[1:], form.right[1:]):
            acc = acc + (s[a] - s[b]) ** 2
        d = math.sqrt(acc)
        return d - form.threshold if form.above else form.threshold - d
    raise TypeError(form)


def oracle_robustness(phi: Formula, states, t: int) -> float:
    """Rob_phi at step t over a single (H, n) trajectory; literal recursion."""
    if isinstance(phi, Truth):
        return math.inf
    if isinstance(phi, Falsity):
        return -math.inf
    if isinstance(phi, Pred):
        return float(_pred_value(phi.form, [float(v) for v in states[t]]))
    if isinstance(phi, Not):
        return -oracle_robustness(phi.child, states, t)
    if isinstance(phi, And):
        return min(
            oracle_robustness(phi.left, states, t),
            oracle_robustness(phi.right, states, t),
        )
    if isinstance(phi, Or):
        return max(
            oracle_robustness(phi.left, states, t),
            oracle_robustness(phi.right, states, t),
        )
    if isinstance(phi, Until):
        a, b = phi.interval.lo, phi.interval.hi
        candidates = []
        for tp in range(t + a, t + b + 1):
            hold = min(oracle_robustness(phi.left, states, tpp) for tpp in range(t, tp + 1))
            candidates.append(min(oracle_robustness(phi.right, states, tp), hold))
        return max(candidates)
    if isinstance(phi, Eventually):
        a, b = phi.interval.lo, phi.interval.hi
        return max(oracle_robustness(phi.child, states, tp) for tp in range(t + a, t + b + 1))
    if isinstance(phi, Globally):
        a, b = phi.interval.lo, phi.interval.hi
        return min(oracle_robustness(phi.child, states, tp) for tp in range(t + a, t + b + 1))
    raise TypeError(phi)


def random_predicate(rng: np.random.Generator, dim: int) -> Pred:
    kind = rng.integers(0, 3)
    if kind == 0:
        weights = [0.0] * dim
        k = int(rng.integers(1, dim + 1))
        for j in rng.choice(dim, size=k, replace=False):
            weights[j] = float(rng.choice([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]))
        return Pred(AffineForm(tuple(weights), float(np.round(rng.normal(0, 2), 3))))
    if kind == 1:
        k = int(rng.integers(1, dim + 1))
        idx = tuple(int(j) for j in np.sort(rng.choice(dim, size=k, replace=False)))
        center = tuple(float(np.round(rng.normal(0, 1), 3)) for _ in idx)
        radius = float(np.round(rng.uniform(0.2, 2.0), 3))
        return Pred(InfNormForm(idx, center, radius, inside=bool(rng.integers(0, 2))))
    k = int(rng.integers(1, dim + 1))
    left = tuple(int(j) for j in rng.choice(dim, size=k, replace=True))
    right = tuple(int(j) for j in rng.choice(dim, size=k, replace=True))
    thr = float(np.round(rng.uniform(0.1, 3.0), 3))
    return Pred(PairDistanceForm(left, right, thr, above=bool(rng.integers(0, 2))))


def random_interval(rng: np.random.Generator) -> Interval:
    # b <= 3, so depth-3 nesting keeps lookahead <= 9 (fits horizon 10)
    a = int(rng.integers(0, 2))
    b = a + int(rng.integers(1, 3))
    return Interval(a, b)


def random_formula(rng: np.random.Generator, dim: int, depth: int) -> Formula:
    """Random AST touching every node kind; lookahead <= 3 * depth."""
    if depth == 0:
        kind = rng.integers(0, 4)
        if kind == 0:
            return Truth()
        if kind == 1:
            return Falsity()
        return random_predicate(rng, dim)
    kind = rng.integers(0, 7)
    if kind == 0:
        return Not(random_formula(rng, dim, depth - 1))
    if kind == 1:
        return And(random_formula(rng, dim, depth - 1), random_formula(rng, dim, depth - 1))
    if kind == 2:
        return Or(random_formula(rng, dim, depth - 1), random_formula(rng, dim, depth - 1))
    if kind == 3:
        return Until(
            random_formula(rng, dim, depth - 1),
            random_formula(rng, dim, depth - 1),
            random_interval(rng),
        )
    if kind == 4:
        return Eventually(random_formula(rng, dim, depth - 1), random_interval(rng))
    if kind == 5:
        return Globally(random_formula(rng, dim, depth - 1), random_interval(rng))
    return random_predicate(rng, dim)


def random_trajectory(rng: np.random.Generator, horizon: int, dim: int) -> np.ndarray:
    return rng.normal(0.0, 1.5, size=(horizon, dim))
