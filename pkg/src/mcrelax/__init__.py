"""McCormick relaxations with subgradient propagation, subgradient-based range
tightening, and a branch-and-bound global minimizer built on them."""

from .expr import Dag, DagBuilder, Op, ParseError, parse, parse_many
from .interval import Box, DomainError, Interval
from .mccormick import McValue, PropagationContext, propagate
from .problem import Problem, builtin, builtin_suite, load_problem, parse_problem
from .tighten import FactorBounds, TightenConfig, tighten_dag

__all__ = [
    "Box",
    "Dag",
    "DagBuilder",
    "DomainError",
    "FactorBounds",
    "Interval",
    "McValue",
    "Op",
    "ParseError",
    "Problem",
    "PropagationContext",
    "TightenConfig",
    "builtin",
    "builtin_suite",
    "load_problem",
    "parse",
    "parse_many",
    "parse_problem",
    "propagate",
    "tighten_dag",
]

__version__ = "0.1.0"
