"""Query dialect: parser, planner, and evaluator.

The dialect is a compact SELECT/WHERE language over the triple store with
distribution-aware builtins, a divergence similarity join, and the
non-monotonic operators OPTIONAL and MINUS.  See docs/query-grammar.md for
the grammar.
"""

from .ast import (
    Bgp,
    Bind,
    Filter,
    Join,
    Minus,
    OptionalPat,
    Query,
    SimJoin,
    Union,
    certainly_bound,
    in_scope_vars,
)
from .parser import parse_query
from .planner import Plan, PlanOptions, plan
from .evaluator import EvalResult, SolutionMapping, evaluate

__all__ = [
    "Bgp",
    "Bind",
    "Filter",
    "Join",
    "Minus",
    "OptionalPat",
    "Query",
    "SimJoin",
    "Union",
    "certainly_bound",
    "in_scope_vars",
    "parse_query",
    "Plan",
    "PlanOptions",
    "plan",
    "EvalResult",
    "SolutionMapping",
    "evaluate",
]
