"""Quantitative predictive monitoring for multi-modal stochastic systems.

Pipeline pieces: temporal-logic robustness (`stl`), scenario simulators and
datasets (`scenarios`), generative trajectory surrogates (`surrogate`), mode
prediction (`modes`), mode-conditional conformalized quantile regression
(`conformal`) and evaluation metrics (`evaluation`), driven end to end by
the `stlcast` command line tool.
"""

__version__ = "0.1.0"
