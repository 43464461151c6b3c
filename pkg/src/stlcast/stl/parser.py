"""Concrete syntax for formulas.

Grammar (EBNF, whitespace insignificant)::

    formula   = or_expr ;
    or_expr   = and_expr , { "|" , and_expr } ;
    and_expr  = until_expr , { "&" , until_expr } ;
    until_expr= unary , [ "U" , interval , unary ] ;
    unary     = "!" , unary
              | "F" , interval , unary
              | "G" , interval , unary
              | atom ;
    atom      = "true" | "false" | "(" , formula , ")" | predicate ;
    predicate = affine , cmp , affine
              | "maxdist" , "(" , vars , ";" , nums , ")" , cmp , number
              | "dist" , "(" , vars , ";" , vars , ")" , cmp , number ;
    affine    = term , { ("+" | "-") , term } ;
    term      = [ number , "*" ] , var | number ;
    interval  = "[" , integer , "," , integer , "]" ;
    cmp       = "<" | "<=" | ">" | ">=" ;
    var       = "x" , integer ;                   (* x0 .. x{n-1} *)
    vars      = var , { "," , var } ;
    nums      = number , { "," , number } ;

Binary "&", "|" associate to the left; "U" does not chain (parenthesize).
Comparisons are normalized to ``g > 0`` form: "<"/"<=" negate the sides, and
strict versus non-strict is not represented (the two differ only on the
measure-zero set g = 0).  Both affine sides may contain variables; the parse
moves everything to the left-hand side.  A predicate must mention at least
one variable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
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
    ParseError,
    Pred,
    Truth,
    Until,
)

__all__ = ["parse_formula"]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<var>x\d+)
  | (?P<name>true|false|maxdist|dist|[UFG])
  | (?P<op><=|>=|[!&|()\[\],;<>*+-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, state_dim: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.state_dim = state_dim

    # -- token helpers -----------------------------------------------------

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        if self.cur.text != text:
            got = self.cur.text or "end of input"
            raise ParseError(f"expected {text!r}, got {got!r}", self.cur.pos)
        return self.advance()

    def at(self, text: str) -> bool:
        return self.cur.text == text

    # -- grammar rules -----------------------------------------------------

    def parse(self) -> Formula:
        phi = self.or_expr()
        if self.cur.kind != "end":
            raise ParseError(f"unexpected trailing input {self.cur.text!r}", self.cur.pos)
        return phi

    def or_expr(self) -> Formula:
        phi = self.and_expr()
        while self.at("|"):
            self.advance()
            phi = Or(phi, self.and_expr())
        return phi

    def and_expr(self) -> Formula:
        phi = self.until_expr()
        while self.at("&"):
            self.advance()
            phi = And(phi, self.until_expr())
        return phi

    def until_expr(self) -> Formula:
        phi = self.unary()
        if self.at("U"):
            self.advance()
            iv = self.interval()
            phi = Until(phi, self.unary(), iv)
        return phi

    def unary(self) -> Formula:
        if self.at("!"):
            self.advance()
            return Not(self.unary())
        if self.at("F"):
            self.advance()
            iv = self.interval()
            return Eventually(self.unary(), iv)
        if self.at("G"):
            self.advance()
            iv = self.interval()
            return Globally(self.unary(), iv)
        return self.atom()

    def interval(self) -> Interval:
        pos = self.cur.pos
        self.expect("[")
        a = self.integer()
        self.expect(",")
        b = self.integer()
        self.expect("]")
        if not (0 <= a < b):
            raise ParseError(f"interval must satisfy 0 <= a < b, got [{a},{b}]", pos)
        return Interval(a, b)

    def integer(self) -> int:
        tok = self.cur
        if tok.kind != "num" or not tok.text.isdigit():
            raise ParseError(f"expected integer, got {tok.text or 'end of input'!r}", tok.pos)
        self.advance()
        return int(tok.text)

    def atom(self) -> Formula:
        tok = self.cur
        if tok.text == "true":
            self.advance()
            return Truth()
        if tok.text == "false":
            self.advance()
            return Falsity()
        if tok.text == "maxdist":
            return self.maxdist_pred()
        if tok.text == "dist":
            return self.dist_pred()
        if tok.text == "(":
            # Either a parenthesized formula or the left side of an affine
            # comparison such as "(x0) > 1"; try the formula first.
            save = self.i
            self.advance()
            try:
                phi = self.or_expr()
                self.expect(")")
            except ParseError:
                self.i = save
                return self.affine_pred()
            if self.cur.text in ("<", "<=", ">", ">="):
                self.i = save
                return self.affine_pred()
            return phi
        if tok.kind in ("num", "var") or tok.text == "-":
            return self.affine_pred()
        raise ParseError(f"expected formula, got {tok.text or 'end of input'!r}", tok.pos)

    # -- predicates --------------------------------------------------------

    def cmp(self) -> str:
        tok = self.cur
        if tok.text not in ("<", "<=", ">", ">="):
            raise ParseError(f"expected comparison, got {tok.text or 'end of input'!r}", tok.pos)
        self.advance()
        return tok.text

    def number(self) -> float:
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        tok = self.cur
        if tok.kind != "num":
            raise ParseError(f"expected number, got {tok.text or 'end of input'!r}", tok.pos)
        self.advance()
        v = float(tok.text)
        return -v if neg else v

    def var_index(self) -> int:
        tok = self.cur
        if tok.kind != "var":
            raise ParseError(f"expected variable x<i>, got {tok.text or 'end of input'!r}", tok.pos)
        self.advance()
        j = int(tok.text[1:])
        if j >= self.state_dim:
            raise ParseError(f"variable x{j} out of range for state dimension {self.state_dim}", tok.pos)
        return j

    def var_list(self) -> tuple[int, ...]:
        out = [self.var_index()]
        while self.at(","):
            self.advance()
            out.append(self.var_index())
        return tuple(out)

    def num_list(self) -> tuple[float, ...]:
        out = [self.number()]
        while self.at(","):
            self.advance()
            out.append(self.number())
        return tuple(out)

    def maxdist_pred(self) -> Pred:
        pos = self.cur.pos
        self.advance()
        self.expect("(")
        idx = self.var_list()
        self.expect(";")
        center = self.num_list()
        self.expect(")")
        if len(center) != len(idx):
            raise ParseError("maxdist needs one center value per coordinate", pos)
        op = self.cmp()
        r = self.number()
        inside = op in ("<", "<=")
        return Pred(InfNormForm(idx, center, r, inside))

    def dist_pred(self) -> Pred:
        pos = self.cur.pos
        self.advance()
        self.expect("(")
        left = self.var_list()
        self.expect(";")
        right = self.var_list()
        self.expect(")")
        if len(left) != len(right):
            raise ParseError("dist needs two coordinate groups of equal size", pos)
        op = self.cmp()
        r = self.number()
        return Pred(PairDistanceForm(left, right, r, above=op in (">", ">=")))

    def affine_expr(self) -> tuple[list[float], float]:
        """Parse a +/- chain of terms into (per-variable weights, constant)."""
        weights = [0.0] * self.state_dim
        const = 0.0
        sign = 1.0
        first = True
        while True:
            if self.at("-"):
                self.advance()
                sign = -sign
            elif self.at("+") and not first:
                self.advance()
            elif not first:
                break
            tok = self.cur
            if tok.kind == "num":
                self.advance()
                coeff = sign * float(tok.text)
                if self.at("*"):
                    self.advance()
                    weights[self.var_index()] += coeff
                else:
                    const += coeff
            elif tok.kind == "var":
                weights[self.var_index()] += sign
            else:
                raise ParseError(f"expected term, got {tok.text or 'end of input'!r}", tok.pos)
            sign = 1.0
            first = False
            if not (self.at("+") or self.at("-")):
                break
        return weights, const

    def affine_pred(self) -> Pred:
        pos = self.cur.pos
        lw, lc = self.affine_expr() if not self.at("(") else self.paren_affine()
        op = self.cmp()
        rw, rc = self.affine_expr() if not self.at("(") else self.paren_affine()
        if op in ("<", "<="):
            lw, lc, rw, rc = rw, rc, lw, lc
        weights = tuple(a - b for a, b in zip(lw, rw))
        offset = lc - rc
        if all(w == 0.0 for w in weights):
            raise ParseError("predicate must reference at least one state variable", pos)
        return Pred(AffineForm(weights, offset))

    def paren_affine(self) -> tuple[list[float], float]:
        self.expect("(")
        out = self.affine_expr()
        self.expect(")")
        return out


def parse_formula(text: str, state_dim: int) -> Formula:
    """Parse ``text`` into a formula over states of dimension ``state_dim``."""
    if state_dim < 1:
        raise ValueError(f"state_dim must be >= 1, got {state_dim}")
    return _Parser(text, state_dim).parse()
