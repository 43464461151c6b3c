"""Formula AST for discrete-time signal temporal logic.

Core node kinds: truth constant, predicate, negation, conjunction and bounded
until.  Disjunction, falsity, eventually and globally are kept as explicit
nodes whose evaluation is defined to match their desugared forms exactly.

Predicates are ``g(state) > 0`` with g drawn from four functional forms
(affine, inf-norm ball inside/outside, pairwise Euclidean distance).  The
robustness of a predicate is the value of g, so its units are state-space
units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "StlError",
    "ParseError",
    "HorizonError",
    "Interval",
    "AffineForm",
    "InfNormForm",
    "PairDistanceForm",
    "Formula",
    "Truth",
    "Falsity",
    "Pred",
    "Not",
    "And",
    "Or",
    "Until",
    "Eventually",
    "Globally",
    "lookahead",
    "required_dim",
    "to_text",
]


class StlError(Exception):
    """Base class for formula construction and evaluation errors."""


class ParseError(StlError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class HorizonError(StlError):
    """Raised when evaluation would need state indices beyond the horizon."""


@dataclass(frozen=True)
class Interval:
    """Step-index interval [lo, hi] with 0 <= lo < hi."""

    lo: int
    hi: int

    def __post_init__(self):
        if not (isinstance(self.lo, int) and isinstance(self.hi, int)):
            raise ValueError(f"interval bounds must be integers, got [{self.lo},{self.hi}]")
        if not (0 <= self.lo < self.hi):
            raise ValueError(f"interval must satisfy 0 <= a < b, got [{self.lo},{self.hi}]")

    def __str__(self) -> str:
        return f"[{self.lo},{self.hi}]"


# --------------------------------------------------------------------------
# Predicate forms.  Each form exposes g over a batch of state sequences
# (shape (batch, horizon, dim) -> (batch, horizon)).  Accumulation order is
# part of the contract: offset/first term first, then remaining terms in
# storage order, so that independent implementations can reproduce results
# bit for bit.
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineForm:
    """g(s) = offset + sum_j weights[j] * s[j], weights over the full state."""

    weights: tuple[float, ...]
    offset: float

    def __post_init__(self):
        if not any(w != 0.0 for w in self.weights):
            raise ValueError("affine predicate must reference at least one state variable")

    @property
    def min_dim(self) -> int:
        return len(self.weights)

    def g_values(self, states):
        acc = self.offset + 0.0 * states[..., 0]
        for j, w in enumerate(self.weights):
            acc = acc + w * states[..., j]
        return acc


@dataclass(frozen=True)
class InfNormForm:
    """Inf-norm distance of selected coordinates to a constant point.

    inside=True:  g = radius - ||s[indices] - center||_inf   (inside the box)
    inside=False: g = ||s[indices] - center||_inf - radius   (outside the box)
    """

    indices: tuple[int, ...]
    center: tuple[float, ...]
    radius: float
    inside: bool

    def __post_init__(self):
        if len(self.indices) == 0 or len(self.indices) != len(self.center):
            raise ValueError("maxdist needs equally many coordinates and center values")

    @property
    def min_dim(self) -> int:
        return max(self.indices) + 1

    def g_values(self, states):
        import numpy as np

        m = np.abs(states[..., self.indices[0]] - self.center[0])
        for idx, c in zip(self.indices[1:], self.center[1:]):
            m = np.maximum(m, np.abs(states[..., idx] - c))
        return self.radius - m if self.inside else m - self.radius


@dataclass(frozen=True)
class PairDistanceForm:
    """Euclidean distance between two groups of state coordinates.

    above=True:  g = d(s[left], s[right]) - threshold   ("dist > r")
    above=False: g = threshold - d(s[left], s[right])   ("dist < r")
    """

    left: tuple[int, ...]
    right: tuple[int, ...]
    threshold: float
    above: bool

    def __post_init__(self):
        if len(self.left) == 0 or len(self.left) != len(self.right):
            raise ValueError("dist needs two coordinate groups of equal size")

    @property
    def min_dim(self) -> int:
        return max(max(self.left), max(self.right)) + 1

    def g_values(self, states):
        import numpy as np

        acc = (states[..., self.left[0]] - states[..., self.right[0]]) ** 2
        for a, b in zip(self.left[1:], self.right[1:]):
            acc = acc + (states[..., a] - states[..., b]) ** 2
        d = np.sqrt(acc)
        return d - self.threshold if self.above else self.threshold - d


PredicateForm = AffineForm | InfNormForm | PairDistanceForm


# --------------------------------------------------------------------------
# Nodes
# --------------------------------------------------------------------------


class Formula:
    """Base class; all nodes are frozen dataclasses and hence hashable."""

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Truth(Formula):
    pass


@dataclass(frozen=True)
class Falsity(Formula):
    pass


@dataclass(frozen=True)
class Pred(Formula):
    form: PredicateForm


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula
    interval: Interval


@dataclass(frozen=True)
class Eventually(Formula):
    child: Formula
    interval: Interval


@dataclass(frozen=True)
class Globally(Formula):
    child: Formula
    interval: Interval


def lookahead(phi: Formula) -> int:
    """Steps beyond the evaluation time the formula may inspect.

    Computed structurally: temporal operators contribute their upper bound,
    nesting adds up, branches take the maximum.
    """
    if isinstance(phi, (Truth, Falsity, Pred)):
        return 0
    if isinstance(phi, Not):
        return lookahead(phi.child)
    if isinstance(phi, (And, Or)):
        return max(lookahead(phi.left), lookahead(phi.right))
    if isinstance(phi, Until):
        return phi.interval.hi + max(lookahead(phi.left), lookahead(phi.right))
    if isinstance(phi, (Eventually, Globally)):
        return phi.interval.hi + lookahead(phi.child)
    raise TypeError(f"not a formula node: {phi!r}")


def required_dim(phi: Formula) -> int:
    """Smallest state dimension the formula's predicates can be evaluated on."""
    if isinstance(phi, (Truth, Falsity)):
        return 0
    if isinstance(phi, Pred):
        return phi.form.min_dim
    if isinstance(phi, Not):
        return required_dim(phi.child)
    if isinstance(phi, (And, Or)):
        return max(required_dim(phi.left), required_dim(phi.right))
    if isinstance(phi, Until):
        return max(required_dim(phi.left), required_dim(phi.right))
    if isinstance(phi, (Eventually, Globally)):
        return required_dim(phi.child)
    raise TypeError(f"not a formula node: {phi!r}")


# --------------------------------------------------------------------------
# Pretty printer (canonical text; the parser round-trips it)
# --------------------------------------------------------------------------

_PREC = {"or": 1, "and": 2, "until": 3, "unary": 4, "atom": 5}


def _fmt_num(x: float) -> str:
    if x == 0.0:
        return "0.0"
    if x == math.floor(x) and abs(x) < 1e15:
        return repr(float(x))
    return repr(x)


def _affine_text(form: AffineForm) -> str:
    terms = [(j, w) for j, w in enumerate(form.weights) if w != 0.0]
    flip = terms[0][1] < 0.0
    parts = []
    for j, w in terms:
        wv = -w if flip else w
        mag = abs(wv)
        coeff = "" if mag == 1.0 else f"{_fmt_num(mag)}*"
        if not parts:
            sign = "-" if wv < 0 else ""
            parts.append(f"{sign}{coeff}x{j}")
        else:
            sign = "-" if wv < 0 else "+"
            parts.append(f" {sign} {coeff}x{j}")
    lhs = "".join(parts)
    if flip:
        return f"{lhs} < {_fmt_num(form.offset)}"
    return f"{lhs} > {_fmt_num(-form.offset)}"


def _pred_text(form: PredicateForm) -> str:
    if isinstance(form, AffineForm):
        return _affine_text(form)
    if isinstance(form, InfNormForm):
        coords = ",".join(f"x{j}" for j in form.indices)
        center = ",".join(_fmt_num(c) for c in form.center)
        op = "<=" if form.inside else ">="
        return f"maxdist({coords}; {center}) {op} {_fmt_num(form.radius)}"
    if isinstance(form, PairDistanceForm):
        left = ",".join(f"x{j}" for j in form.left)
        right = ",".join(f"x{j}" for j in form.right)
        op = ">" if form.above else "<"
        return f"dist({left}; {right}) {op} {_fmt_num(form.threshold)}"
    raise TypeError(f"unknown predicate form {form!r}")


def _text(phi: Formula, parent_prec: int) -> str:
    if isinstance(phi, Truth):
        return "true"
    if isinstance(phi, Falsity):
        return "false"
    if isinstance(phi, Pred):
        body = _pred_text(phi.form)
        return body if parent_prec == 0 else f"({body})"
    if isinstance(phi, Not):
        return f"!{_text(phi.child, _PREC['unary'])}"
    if isinstance(phi, Eventually):
        return f"F{phi.interval}{_text(phi.child, _PREC['unary'])}"
    if isinstance(phi, Globally):
        return f"G{phi.interval}{_text(phi.child, _PREC['unary'])}"
    if isinstance(phi, Until):
        body = f"{_text(phi.left, _PREC['until'])} U{phi.interval} {_text(phi.right, _PREC['until'])}"
        return body if parent_prec < _PREC["until"] else f"({body})"
    if isinstance(phi, And):
        # left child may chain (parser is left-associative); right may not
        body = f"{_text(phi.left, _PREC['and'] - 1)} & {_text(phi.right, _PREC['and'])}"
        return body if parent_prec < _PREC["and"] else f"({body})"
    if isinstance(phi, Or):
        body = f"{_text(phi.left, _PREC['or'] - 1)} | {_text(phi.right, _PREC['or'])}"
        return body if parent_prec < _PREC["or"] else f"({body})"
    raise TypeError(f"not a formula node: {phi!r}")


def to_text(phi: Formula) -> str:
    """Canonical concrete syntax; ``parse_formula`` recovers an equal AST."""
    return _text(phi, 0)
