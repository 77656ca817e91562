"""Abstract syntax for the query dialect.

Pattern nodes form the WHERE tree; expression nodes appear inside FILTER
and BIND.  Scope helpers compute which variables a pattern may bind
(``in_scope_vars``) and which it binds in every solution
(``certainly_bound``) — the latter is what makes filter pushdown safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union as TypingUnion

from ..store import Term, TriplePattern, Variable

# --- expressions ----------------------------------------------------------------


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class Const:
    """A literal constant: float, str, or a distribution-valued term."""

    value: object


@dataclass(frozen=True)
class Cmp:
    op: str  # one of < <= > >= = !=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Arith:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Call:
    func: str  # PGT | PBETWEEN | CDF | JSD | CONV | FUSE | MEAN | VAR
    args: tuple["Expr", ...]


Expr = TypingUnion[VarRef, Const, Cmp, Arith, Neg, Call]

BUILTINS = {
    "PGT": 2,
    "PBETWEEN": 3,
    "CDF": 2,
    "JSD": 2,
    "CONV": 2,
    "FUSE": 2,
    "MEAN": 1,
    "VAR": 1,
}


def expr_vars(e: Expr) -> set[str]:
    if isinstance(e, VarRef):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Cmp, Arith)):
        return expr_vars(e.left) | expr_vars(e.right)
    if isinstance(e, Neg):
        return expr_vars(e.operand)
    if isinstance(e, Call):
        out: set[str] = set()
        for a in e.args:
            out |= expr_vars(a)
        return out
    raise TypeError(f"not an expression: {e!r}")


def fmt_expr(e: Expr) -> str:
    if isinstance(e, VarRef):
        return "?" + e.name
    if isinstance(e, Const):
        v = e.value
        if isinstance(v, float):
            return f"{v:g}"
        if isinstance(v, str):
            return '"' + v + '"'
        return str(v)
    if isinstance(e, Cmp):
        return f"({fmt_expr(e.left)} {e.op} {fmt_expr(e.right)})"
    if isinstance(e, Arith):
        return f"({fmt_expr(e.left)} {e.op} {fmt_expr(e.right)})"
    if isinstance(e, Neg):
        return f"(-{fmt_expr(e.operand)})"
    if isinstance(e, Call):
        return e.func + "(" + ", ".join(fmt_expr(a) for a in e.args) + ")"
    raise TypeError(f"not an expression: {e!r}")


# --- graph patterns -------------------------------------------------------------


@dataclass(frozen=True)
class Bgp:
    patterns: tuple[TriplePattern, ...]


@dataclass(frozen=True)
class Join:
    left: "Pattern"
    right: "Pattern"


@dataclass(frozen=True)
class Union:
    left: "Pattern"
    right: "Pattern"


@dataclass(frozen=True)
class OptionalPat:
    left: "Pattern"
    right: "Pattern"


@dataclass(frozen=True)
class Minus:
    left: "Pattern"
    right: "Pattern"


@dataclass(frozen=True)
class Filter:
    pattern: "Pattern"
    expr: Expr


@dataclass(frozen=True)
class Bind:
    pattern: "Pattern"
    expr: Expr
    var: str


@dataclass(frozen=True)
class SimJoin:
    left: "Pattern"
    right: "Pattern"
    var_a: str
    var_b: str
    theta: float


Pattern = TypingUnion[Bgp, Join, Union, OptionalPat, Minus, Filter, Bind, SimJoin]

EMPTY_BGP = Bgp(())


@dataclass(frozen=True)
class Query:
    select_vars: tuple[str, ...]
    where: Pattern


def in_scope_vars(p: Pattern) -> set[str]:
    """Variables a pattern may bind in at least one solution."""
    if isinstance(p, Bgp):
        out: set[str] = set()
        for tp in p.patterns:
            out |= {v.name for v in tp.variables()}
        return out
    if isinstance(p, (Join, Union, OptionalPat, SimJoin)):
        return in_scope_vars(p.left) | in_scope_vars(p.right)
    if isinstance(p, Minus):
        return in_scope_vars(p.left)
    if isinstance(p, Filter):
        return in_scope_vars(p.pattern)
    if isinstance(p, Bind):
        return in_scope_vars(p.pattern) | {p.var}
    raise TypeError(f"not a pattern: {p!r}")


def certainly_bound(p: Pattern) -> set[str]:
    """Variables bound in every solution of the pattern."""
    if isinstance(p, Bgp):
        return in_scope_vars(p)
    if isinstance(p, (Join, SimJoin)):
        return certainly_bound(p.left) | certainly_bound(p.right)
    if isinstance(p, Union):
        return certainly_bound(p.left) & certainly_bound(p.right)
    if isinstance(p, OptionalPat):
        return certainly_bound(p.left)
    if isinstance(p, Minus):
        return certainly_bound(p.left)
    if isinstance(p, Filter):
        return certainly_bound(p.pattern)
    if isinstance(p, Bind):
        return certainly_bound(p.pattern) | {p.var}
    raise TypeError(f"not a pattern: {p!r}")
