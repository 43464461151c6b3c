"""Signal temporal logic: formulas, parsing, robustness."""

from .ast import (
    AffineForm,
    And,
    Eventually,
    Falsity,
    Formula,
    Globally,
    HorizonError,
    InfNormForm,
    Interval,
    Not,
    Or,
    PairDistanceForm,
    ParseError,
    Pred,
    StlError,
    Truth,
    Until,
    lookahead,
    required_dim,
    to_text,
)
from .parser import parse_formula
from .semantics import eval_boolean, eval_robustness, robustness_batch, robustness_signal

__all__ = [
    "AffineForm",
    "And",
    "Eventually",
    "Falsity",
    "Formula",
    "Globally",
    "HorizonError",
    "InfNormForm",
    "Interval",
    "Not",
    "Or",
    "PairDistanceForm",
    "ParseError",
    "Pred",
    "StlError",
    "Truth",
    "Until",
    "eval_boolean",
    "eval_robustness",
    "lookahead",
    "parse_formula",
    "required_dim",
    "robustness_batch",
    "robustness_signal",
    "to_text",
]
