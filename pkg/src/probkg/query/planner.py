"""Physical planner: join ordering, filter pushdown, SIMJOIN lowering.

With optimization on, basic graph patterns are joined greedily by ascending
exact index cardinality (preferring patterns connected to what is already
joined), and every filter whose variables are certainly bound by one branch
of a join is relocated beneath that join, as deep as it can go; each move
is recorded on the plan's pushdown trace.  With optimization off the plan
is the syntactic left-deep tree with filters where they appeared.

The similarity join has two lowerings: the dedicated operator with
lower-bound pruning (default), or — as the measurement baseline — a rewrite
into the dialect itself (cross join + BIND of the divergence + FILTER),
which then flows through the ordinary pipeline with no special code path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from ..sampling import SamplerConfig
from ..store import Graph, TriplePattern, Variable, serialize_term
from .ast import (
    Bgp,
    Bind,
    Call,
    Cmp,
    Const,
    Expr,
    Filter,
    Join,
    Minus,
    OptionalPat,
    Pattern,
    Query,
    SimJoin,
    Union,
    VarRef,
    expr_vars,
    fmt_expr,
)

# --- options and physical operators ---------------------------------------------


@dataclass(frozen=True)
class PlanOptions:
    pushdown: bool = True
    simjoin_dedicated: bool = True
    simjoin_bins: int = 32
    simjoin_grid: Optional[tuple[float, ...]] = None
    strategy: str = "closed"  # closed | naive | stratified | sprt | cascade
    sampler: Optional[SamplerConfig] = None
    seed: int = 0


@dataclass
class IndexScan:
    pattern: TriplePattern
    est: float = 0.0


@dataclass
class TableOp:
    """The unit table: one empty mapping."""

    est: float = 1.0


@dataclass
class HashJoin:
    left: "PhysOp"
    right: "PhysOp"
    est: float = 0.0


@dataclass
class FilterOp:
    child: "PhysOp"
    expr: Expr
    est: float = 0.0


@dataclass
class BindOp:
    child: "PhysOp"
    expr: Expr
    var: str
    est: float = 0.0


@dataclass
class UnionOp:
    left: "PhysOp"
    right: "PhysOp"
    est: float = 0.0


@dataclass
class LeftJoinOp:
    left: "PhysOp"
    right: "PhysOp"
    est: float = 0.0


@dataclass
class MinusOp:
    left: "PhysOp"
    right: "PhysOp"
    est: float = 0.0


@dataclass
class SimJoinOp:
    left: "PhysOp"
    right: "PhysOp"
    var_a: str
    var_b: str
    theta: float
    bins: int
    grid: Optional[tuple[float, ...]]
    est: float = 0.0


PhysOp = object  # duck-typed union of the operator dataclasses


@dataclass
class Plan:
    root: PhysOp
    select_vars: tuple[str, ...]
    options: PlanOptions
    trace: list[str] = field(default_factory=list)


def certain_vars(op: PhysOp) -> set[str]:
    """Variables bound in every mapping the operator emits."""
    if isinstance(op, IndexScan):
        return {v.name for v in op.pattern.variables()}
    if isinstance(op, TableOp):
        return set()
    if isinstance(op, (HashJoin, SimJoinOp)):
        return certain_vars(op.left) | certain_vars(op.right)
    if isinstance(op, FilterOp):
        return certain_vars(op.child)
    if isinstance(op, BindOp):
        return certain_vars(op.child) | {op.var}
    if isinstance(op, UnionOp):
        return certain_vars(op.left) & certain_vars(op.right)
    if isinstance(op, (LeftJoinOp, MinusOp)):
        return certain_vars(op.left)
    raise TypeError(f"not a physical operator: {op!r}")


# --- planning -------------------------------------------------------------------

_FRESH = itertools.count()


def _rewrite_simjoin(p: Pattern) -> Pattern:
    """Lower SIMJOIN to cross join + BIND(JSD) + FILTER (the naive baseline)."""
    if isinstance(p, Bgp):
        return p
    if isinstance(p, Join):
        return Join(_rewrite_simjoin(p.left), _rewrite_simjoin(p.right))
    if isinstance(p, Union):
        return Union(_rewrite_simjoin(p.left), _rewrite_simjoin(p.right))
    if isinstance(p, OptionalPat):
        return OptionalPat(_rewrite_simjoin(p.left), _rewrite_simjoin(p.right))
    if isinstance(p, Minus):
        return Minus(_rewrite_simjoin(p.left), _rewrite_simjoin(p.right))
    if isinstance(p, Filter):
        return Filter(_rewrite_simjoin(p.pattern), p.expr)
    if isinstance(p, Bind):
        return Bind(_rewrite_simjoin(p.pattern), p.expr, p.var)
    if isinstance(p, SimJoin):
        # '#' cannot appear in user variable names, so the fresh variable
        # can never collide or be selected.
        fresh = f"#jsd{next(_FRESH)}"
        joined = Join(_rewrite_simjoin(p.left), _rewrite_simjoin(p.right))
        bound = Bind(joined, Call("JSD", (VarRef(p.var_a), VarRef(p.var_b))), fresh)
        return Filter(bound, Cmp("<=", VarRef(fresh), Const(p.theta)))
    raise TypeError(f"not a pattern: {p!r}")


class _Planner:
    def __init__(self, opts: PlanOptions, graph: Optional[Graph]):
        self.opts = opts
        self.graph = graph
        self.trace: list[str] = []

    def _pattern_card(self, tp: TriplePattern) -> float:
        if self.graph is None:
            return 1.0
        return float(self.graph.count_matches(tp))

    def _join_est(self, left: float, right: float, shared: int) -> float:
        est = left * right
        if self.graph is not None and shared:
            est /= max(1.0, float(len(self.graph))) ** (0.5 * shared)
        return est

    def build(self, p: Pattern) -> PhysOp:
        if isinstance(p, Bgp):
            return self._build_bgp(p)
        if isinstance(p, Join):
            left = self.build(p.left)
            right = self.build(p.right)
            shared = len(certain_vars(left) & certain_vars(right))
            return HashJoin(left, right, self._join_est(left.est, right.est, shared))
        if isinstance(p, Union):
            left = self.build(p.left)
            right = self.build(p.right)
            return UnionOp(left, right, left.est + right.est)
        if isinstance(p, OptionalPat):
            left = self.build(p.left)
            right = self.build(p.right)
            return LeftJoinOp(left, right, max(left.est, left.est * right.est))
        if isinstance(p, Minus):
            left = self.build(p.left)
            right = self.build(p.right)
            return MinusOp(left, right, left.est)
        if isinstance(p, Bind):
            child = self.build(p.pattern)
            return BindOp(child, p.expr, p.var, child.est)
        if isinstance(p, SimJoin):
            left = self.build(p.left)
            right = self.build(p.right)
            return SimJoinOp(
                left,
                right,
                p.var_a,
                p.var_b,
                p.theta,
                self.opts.simjoin_bins,
                self.opts.simjoin_grid,
                left.est * right.est,
            )
        if isinstance(p, Filter):
            child = self.build(p.pattern)
            if self.opts.pushdown:
                sunk, crossed = self._sink(child, p.expr)
                if sunk is not None and crossed > 0:
                    self.trace.append(
                        f"pushed FILTER{fmt_expr(p.expr)} below {crossed} join(s)"
                    )
                    return sunk
            return FilterOp(child, p.expr, child.est)
        raise TypeError(f"not a pattern: {p!r}")

    def _sink(self, op: PhysOp, e: Expr) -> tuple[Optional[PhysOp], int]:
        """Place the filter as deep as its variables allow; count joins crossed."""
        if not expr_vars(e) <= certain_vars(op):
            return None, 0
        if isinstance(op, HashJoin):
            sunk, crossed = self._sink(op.left, e)
            if sunk is not None:
                return HashJoin(sunk, op.right, op.est), crossed + 1
            sunk, crossed = self._sink(op.right, e)
            if sunk is not None:
                return HashJoin(op.left, sunk, op.est), crossed + 1
            return FilterOp(op, e, op.est), 0
        return FilterOp(op, e, op.est), 0

    def _build_bgp(self, p: Bgp) -> PhysOp:
        if not p.patterns:
            return TableOp()
        scans = [IndexScan(tp, self._pattern_card(tp)) for tp in p.patterns]
        if not self.opts.pushdown or len(scans) == 1:
            op: PhysOp = scans[0]
            bound = certain_vars(op)
            for s in scans[1:]:
                svars = certain_vars(s)
                op = HashJoin(op, s, self._join_est(op.est, s.est, len(bound & svars)))
                bound |= svars
            return op
        remaining = list(range(len(scans)))
        start = min(remaining, key=lambda i: (scans[i].est, i))
        remaining.remove(start)
        op = scans[start]
        bound = certain_vars(op)
        while remaining:
            connected = [i for i in remaining if bound & certain_vars(scans[i])]
            pool = connected if connected else remaining
            nxt = min(pool, key=lambda i: (scans[i].est, i))
            remaining.remove(nxt)
            svars = certain_vars(scans[nxt])
            op = HashJoin(op, scans[nxt], self._join_est(op.est, scans[nxt].est, len(bound & svars)))
            bound |= svars
        return op


def plan(ast: Query, opts: PlanOptions, graph: Optional[Graph] = None) -> Plan:
    """Compile the AST to a physical plan (pass the graph for exact scan counts)."""
    where = ast.where
    if not opts.simjoin_dedicated:
        where = _rewrite_simjoin(where)
    planner = _Planner(opts, graph)
    root = planner.build(where)
    return Plan(root, ast.select_vars, opts, planner.trace)


def _fmt_term(t) -> str:
    if isinstance(t, Variable):
        return "?" + t.name
    return serialize_term(t)


def fmt_plan(p: Plan) -> str:
    """Indented operator tree with cardinality estimates, for --explain."""
    lines: list[str] = []

    def walk(op: PhysOp, depth: int):
        pad = "  " * depth
        if isinstance(op, IndexScan):
            t = op.pattern
            lines.append(
                f"{pad}IndexScan {_fmt_term(t.s)} {_fmt_term(t.p)} {_fmt_term(t.o)}"
                f" (est {op.est:g})"
            )
        elif isinstance(op, TableOp):
            lines.append(f"{pad}Table (unit)")
        elif isinstance(op, HashJoin):
            lines.append(f"{pad}HashJoin (est {op.est:g})")
            walk(op.left, depth + 1)
            walk(op.right, depth + 1)
        elif isinstance(op, FilterOp):
            lines.append(f"{pad}Filter {fmt_expr(op.expr)} (est {op.est:g})")
            walk(op.child, depth + 1)
        elif isinstance(op, BindOp):
            lines.append(f"{pad}Bind {fmt_expr(op.expr)} AS ?{op.var}")
            walk(op.child, depth + 1)
        elif isinstance(op, UnionOp):
            lines.append(f"{pad}Union (est {op.est:g})")
            walk(op.left, depth + 1)
            walk(op.right, depth + 1)
        elif isinstance(op, LeftJoinOp):
            lines.append(f"{pad}LeftJoin (est {op.est:g})")
            walk(op.left, depth + 1)
            walk(op.right, depth + 1)
        elif isinstance(op, MinusOp):
            lines.append(f"{pad}Minus (est {op.est:g})")
            walk(op.left, depth + 1)
            walk(op.right, depth + 1)
        elif isinstance(op, SimJoinOp):
            lines.append(
                f"{pad}SimJoin ?{op.var_a} ~ ?{op.var_b} (theta {op.theta:g}, est {op.est:g})"
            )
            walk(op.left, depth + 1)
            walk(op.right, depth + 1)
        else:
            lines.append(f"{pad}{op!r}")

    walk(p.root, 0)
    for t in p.trace:
        lines.append(f"-- {t}")
    return "\n".join(lines)
