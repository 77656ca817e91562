"""Lineage of query answers and its Boolean lowering.

Answers accumulate a provenance expression over triple variables: scans
contribute ``Var(triple_id)``, joins multiply (``Times``), unions and
duplicate-answer merging add (``Plus``), and the non-monotonic operators
(OPTIONAL's unmatched branch, MINUS) subtract with the monus ``a - b``,
meaning "a holds and no way of deriving b does".

For probability computation the expression is lowered to a Boolean formula
in negation normal form: plus becomes or, times becomes and, and
``Monus(a, b)`` becomes ``a AND NOT b`` with the negation pushed down to
literals.  Over Boolean (existence) semantics this lowering is exact: the
formula's satisfying assignments are precisely the possible worlds in which
the answer is derivable.

Boolean formulas are canonical by construction — children flattened,
deduplicated and sorted, constants folded, complementary literals detected,
and unit literals propagated into their AND-siblings — so structurally
equal formulas are one value, which the circuit compiler uses as its cache
key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

# --- lineage expressions ------------------------------------------------------


@dataclass(frozen=True)
class Var:
    tid: int


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class One:
    pass


@dataclass(frozen=True)
class Plus:
    children: tuple["LineageExpr", ...]


@dataclass(frozen=True)
class Times:
    children: tuple["LineageExpr", ...]


@dataclass(frozen=True)
class Monus:
    left: "LineageExpr"
    right: "LineageExpr"


LineageExpr = Union[Var, Zero, One, Plus, Times, Monus]

ZERO = Zero()
ONE = One()


def plus_of(items: Iterable[LineageExpr]) -> LineageExpr:
    """n-ary plus; drops zeros, unwraps singletons, flattens nested plus."""
    kids: list[LineageExpr] = []
    for x in items:
        if isinstance(x, Zero):
            continue
        if isinstance(x, Plus):
            kids.extend(x.children)
        else:
            kids.append(x)
    if not kids:
        return ZERO
    if len(kids) == 1:
        return kids[0]
    return Plus(tuple(kids))


def times_of(items: Iterable[LineageExpr]) -> LineageExpr:
    """n-ary times; any zero annihilates, ones drop out, nesting flattens."""
    kids: list[LineageExpr] = []
    for x in items:
        if isinstance(x, Zero):
            return ZERO
        if isinstance(x, One):
            continue
        if isinstance(x, Times):
            kids.extend(x.children)
        else:
            kids.append(x)
    if not kids:
        return ONE
    if len(kids) == 1:
        return kids[0]
    return Times(tuple(kids))


def monus_of(left: LineageExpr, right: LineageExpr) -> LineageExpr:
    """left minus right; a - 0 = a and 0 - b = 0."""
    if isinstance(right, Zero):
        return left
    if isinstance(left, Zero):
        return ZERO
    return Monus(left, right)


def fmt_lineage(expr: LineageExpr) -> str:
    """Textual form for debugging and golden tests: ``(x1 * x2) + (x3 - x4)``."""
    if isinstance(expr, Var):
        return f"x{expr.tid}"
    if isinstance(expr, Zero):
        return "0"
    if isinstance(expr, One):
        return "1"
    if isinstance(expr, Plus):
        return "(" + " + ".join(fmt_lineage(c) for c in expr.children) + ")"
    if isinstance(expr, Times):
        return "(" + " * ".join(fmt_lineage(c) for c in expr.children) + ")"
    if isinstance(expr, Monus):
        return f"({fmt_lineage(expr.left)} - {fmt_lineage(expr.right)})"
    raise TypeError(f"not a lineage expression: {expr!r}")


def lineage_vars(expr: LineageExpr) -> frozenset[int]:
    if isinstance(expr, Var):
        return frozenset((expr.tid,))
    if isinstance(expr, (Zero, One)):
        return frozenset()
    if isinstance(expr, (Plus, Times)):
        out: frozenset[int] = frozenset()
        for c in expr.children:
            out |= lineage_vars(c)
        return out
    if isinstance(expr, Monus):
        return lineage_vars(expr.left) | lineage_vars(expr.right)
    raise TypeError(f"not a lineage expression: {expr!r}")


def has_monus(expr: LineageExpr) -> bool:
    if isinstance(expr, Monus):
        return True
    if isinstance(expr, (Plus, Times)):
        return any(has_monus(c) for c in expr.children)
    return False


# --- Boolean formulas (NNF, canonical) -----------------------------------------


@dataclass(frozen=True, eq=False)
class BoolFormula:
    """Base of the NNF formula nodes; canonical serialization is identity."""

    skey: str = field(repr=False, compare=False)

    def __eq__(self, other) -> bool:
        return isinstance(other, BoolFormula) and self.skey == other.skey

    def __hash__(self) -> int:
        return hash(self.skey)


@dataclass(frozen=True, eq=False)
class Lit(BoolFormula):
    var: int = 0
    positive: bool = True


@dataclass(frozen=True, eq=False)
class TrueF(BoolFormula):
    pass


@dataclass(frozen=True, eq=False)
class FalseF(BoolFormula):
    pass


@dataclass(frozen=True, eq=False)
class And(BoolFormula):
    children: tuple[BoolFormula, ...] = ()


@dataclass(frozen=True, eq=False)
class Or(BoolFormula):
    children: tuple[BoolFormula, ...] = ()


TRUE = TrueF("T")
FALSE = FalseF("F")

_LIT_CACHE: dict[tuple[int, bool], Lit] = {}


def lit(var: int, positive: bool = True) -> Lit:
    key = (var, positive)
    cached = _LIT_CACHE.get(key)
    if cached is None:
        cached = Lit(("x" if positive else "~x") + str(var), var, positive)
        _LIT_CACHE[key] = cached
    return cached


def and_of(items: Iterable[BoolFormula]) -> BoolFormula:
    """Canonical conjunction with constant folding and unit propagation.

    Literal children are treated as units: complementary units collapse the
    whole node to false, and every non-literal child is conditioned on the
    units (which may cascade).  Children end up deduplicated and sorted by
    serialization.
    """
    kids: dict[str, BoolFormula] = {}
    units: dict[int, bool] = {}
    for x in _flatten(items, And):
        if x is FALSE:
            return FALSE
        if x is TRUE:
            continue
        if isinstance(x, Lit):
            if units.get(x.var, x.positive) != x.positive:
                return FALSE
            units[x.var] = x.positive
        kids[x.skey] = x
    if units:
        changed = False
        rebuilt: list[BoolFormula] = []
        for x in kids.values():
            if isinstance(x, Lit):
                rebuilt.append(x)
                continue
            y = condition(x, units)
            changed = changed or y != x
            rebuilt.append(y)
        if changed:
            return and_of(rebuilt)
    vals = sorted(kids.values(), key=lambda f: f.skey)
    if not vals:
        return TRUE
    if len(vals) == 1:
        return vals[0]
    return And("(&" + "".join(v.skey for v in vals) + ")", tuple(vals))


def or_of(items: Iterable[BoolFormula]) -> BoolFormula:
    """Canonical disjunction with constant folding."""
    kids: dict[str, BoolFormula] = {}
    pos: set[int] = set()
    neg: set[int] = set()
    for x in _flatten(items, Or):
        if x is TRUE:
            return TRUE
        if x is FALSE:
            continue
        if isinstance(x, Lit):
            (pos if x.positive else neg).add(x.var)
            if x.var in pos and x.var in neg:
                return TRUE
        kids[x.skey] = x
    vals = sorted(kids.values(), key=lambda f: f.skey)
    if not vals:
        return FALSE
    if len(vals) == 1:
        return vals[0]
    return Or("(|" + "".join(v.skey for v in vals) + ")", tuple(vals))


def _flatten(items: Iterable[BoolFormula], kind: type) -> Iterable[BoolFormula]:
    for x in items:
        if isinstance(x, kind):
            yield from x.children
        else:
            yield x


def condition(f: BoolFormula, assignment: dict[int, bool]) -> BoolFormula:
    """Substitute literal values and re-canonicalize."""
    if isinstance(f, Lit):
        val = assignment.get(f.var)
        if val is None:
            return f
        return TRUE if val == f.positive else FALSE
    if isinstance(f, And):
        return and_of(condition(c, assignment) for c in f.children)
    if isinstance(f, Or):
        return or_of(condition(c, assignment) for c in f.children)
    return f


def negate(f: BoolFormula) -> BoolFormula:
    """NNF negation: push through connectives, flip literals."""
    if f is TRUE:
        return FALSE
    if f is FALSE:
        return TRUE
    if isinstance(f, Lit):
        return lit(f.var, not f.positive)
    if isinstance(f, And):
        return or_of(negate(c) for c in f.children)
    if isinstance(f, Or):
        return and_of(negate(c) for c in f.children)
    raise TypeError(f"not a formula: {f!r}")


def formula_vars(f: BoolFormula) -> frozenset[int]:
    if isinstance(f, Lit):
        return frozenset((f.var,))
    if isinstance(f, (And, Or)):
        out: frozenset[int] = frozenset()
        for c in f.children:
            out |= formula_vars(c)
        return out
    return frozenset()


def negative_vars(f: BoolFormula) -> frozenset[int]:
    """Variables that occur under negation anywhere in the formula."""
    if isinstance(f, Lit):
        return frozenset() if f.positive else frozenset((f.var,))
    if isinstance(f, (And, Or)):
        out: frozenset[int] = frozenset()
        for c in f.children:
            out |= negative_vars(c)
        return out
    return frozenset()


def to_boolean(expr: LineageExpr) -> BoolFormula:
    """Lower lineage to its possible-worlds membership formula (NNF).

    Var maps to a positive literal, Plus to or, Times to and, and
    ``Monus(a, b)`` to ``bool(a) AND negate(bool(b))``.
    """
    if isinstance(expr, Var):
        return lit(expr.tid, True)
    if isinstance(expr, Zero):
        return FALSE
    if isinstance(expr, One):
        return TRUE
    if isinstance(expr, Plus):
        return or_of(to_boolean(c) for c in expr.children)
    if isinstance(expr, Times):
        return and_of(to_boolean(c) for c in expr.children)
    if isinstance(expr, Monus):
        return and_of((to_boolean(expr.left), negate(to_boolean(expr.right))))
    raise TypeError(f"not a lineage expression: {expr!r}")


def eval_formula(f: BoolFormula, assignment: dict[int, bool]) -> bool:
    """Evaluate under a total assignment (brute-force reference)."""
    if f is TRUE:
        return True
    if f is FALSE:
        return False
    if isinstance(f, Lit):
        return assignment[f.var] == f.positive
    if isinstance(f, And):
        return all(eval_formula(c, assignment) for c in f.children)
    if isinstance(f, Or):
        return any(eval_formula(c, assignment) for c in f.children)
    raise TypeError(f"not a formula: {f!r}")
