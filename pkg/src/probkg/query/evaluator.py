"""Plan evaluation with lineage tracking.

Two modes:

* ``lineage`` (default) — every mapping carries a provenance expression
  over the graph's uncertain triples.  OPTIONAL and MINUS follow
  possible-worlds semantics: besides the joined rows, each left row is
  emitted with lineage ``left - (sum of compatible right lineages)``,
  covering the worlds where no right match survives.  Rows whose lineage
  can never hold (formula false) may therefore appear; they carry
  probability zero and are dropped at probability-reporting time.

* ``plain`` — ordinary deterministic evaluation.  Passing ``active`` (a set
  of uncertain-triple ids that exist) evaluates one possible world; the
  exhaustive oracle is built on this.

Scans over triples with existence probability 1 contribute the lineage
unit (their variable is true in every world), so formulas only mention
genuinely uncertain triples.

Filter and bind expressions are total: a type error (or any distribution-
algebra error) makes the filter false / drops the bound row, and is
counted in the result's warnings.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from ..distributions import (
    Dirichlet,
    Gmm,
    Histogram,
    convolve,
    family_of,
    format_distribution,
    fuse,
    jsd,
    jsd_auto,
    jsd_lower_bound,
    mean_of,
    pooled_grid,
    prob_mass,
    variance_of,
)
from ..distributions import cdf as dist_cdf
from ..errors import BadGrid, EvalTypeError, FamilyMismatch, ProbKgError
from ..lineage import (
    ONE,
    LineageExpr,
    Var,
    fmt_lineage,
    monus_of,
    plus_of,
    times_of,
)
from ..sampling import ABOVE, UNDECIDED, Decision, SamplerConfig, mc_threshold
from ..store import (
    NUM_DATATYPE,
    PLAIN_DATATYPE,
    DistLiteral,
    Graph,
    Iri,
    Literal,
    Term,
    serialize_term,
    term_sort_key,
)
from .ast import Arith, Call, Cmp, Const, Expr, Neg, VarRef, fmt_expr
from .planner import (
    BindOp,
    FilterOp,
    HashJoin,
    IndexScan,
    LeftJoinOp,
    MinusOp,
    Plan,
    PlanOptions,
    SimJoinOp,
    TableOp,
    UnionOp,
    certain_vars,
)

Distribution = (Gmm, Histogram, Dirichlet)

# Lower bounds sit within quadrature tolerance of the true divergence, so
# pruning requires clearing the threshold by more than that tolerance —
# otherwise a bound equal to the true value could falsely prune a pair
# that quadrature would keep.
_PRUNE_MARGIN = 1e-9


@dataclass
class SolutionMapping:
    bindings: dict[str, Term]
    lineage: LineageExpr = ONE


@dataclass
class SimJoinStats:
    candidates: int = 0
    pruned: int = 0
    survivors: int = 0
    mismatches: int = 0


@dataclass
class EvalResult:
    mappings: list[SolutionMapping]
    warnings: dict[str, int] = field(default_factory=dict)
    simjoin_stats: list[SimJoinStats] = field(default_factory=list)
    decisions: list[tuple[str, Decision]] = field(default_factory=list)


class _Ctx:
    def __init__(
        self,
        graph: Graph,
        opts: PlanOptions,
        mode: str,
        active: Optional[frozenset[int]],
    ):
        self.graph = graph
        self.opts = opts
        self.mode = mode
        self.active = active
        self.warnings: Counter[str] = Counter()
        self.sj_stats: list[SimJoinStats] = []
        self.decisions: list[tuple[str, Decision]] = []
        self._jsd_cache: dict[tuple, tuple] = {}


def _as_number(term_or_value, expr: Expr) -> float:
    v = term_or_value
    if isinstance(v, float):
        return v
    raise EvalTypeError(f"expected a number in {fmt_expr(expr)}")


def _as_dist(v, expr: Expr):
    if isinstance(v, Distribution):
        return v
    raise EvalTypeError(f"expected a distribution in {fmt_expr(expr)}")


def _term_value(t: Term):
    """Unwrap a bound term to an expression value."""
    if isinstance(t, DistLiteral):
        return t.dist
    if isinstance(t, Literal):
        if t.datatype == NUM_DATATYPE:
            try:
                return float(t.lexical)
            except ValueError as exc:
                raise EvalTypeError(f"malformed number literal {t.lexical!r}") from exc
        if t.datatype == PLAIN_DATATYPE and t.lang is None:
            return t.lexical
        return t
    return t


def _value_to_term(v, expr: Expr) -> Term:
    if isinstance(v, float):
        return Literal(format(v, ".17g"), NUM_DATATYPE)
    if isinstance(v, str):
        return Literal(v, PLAIN_DATATYPE)
    if isinstance(v, Distribution):
        return DistLiteral(v)
    if isinstance(v, (Iri, Literal, DistLiteral)):
        return v
    raise EvalTypeError(f"cannot bind value of {fmt_expr(expr)}")


def _eval_expr(ctx: _Ctx, m: SolutionMapping, e: Expr):
    if isinstance(e, VarRef):
        t = m.bindings.get(e.name)
        if t is None:
            raise EvalTypeError(f"unbound variable ?{e.name}")
        return _term_value(t)
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Neg):
        return -_as_number(_eval_expr(ctx, m, e.operand), e)
    if isinstance(e, Arith):
        a = _as_number(_eval_expr(ctx, m, e.left), e)
        b = _as_number(_eval_expr(ctx, m, e.right), e)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0.0:
            raise EvalTypeError(f"division by zero in {fmt_expr(e)}")
        return a / b
    if isinstance(e, Cmp):
        a = _eval_expr(ctx, m, e.left)
        b = _eval_expr(ctx, m, e.right)
        if e.op == "=":
            return a == b
        if e.op == "!=":
            return a != b
        if isinstance(a, float) and isinstance(b, float):
            pass
        elif isinstance(a, str) and isinstance(b, str):
            pass
        else:
            raise EvalTypeError(f"unorderable operands in {fmt_expr(e)}")
        if e.op == "<":
            return a < b
        if e.op == "<=":
            return a <= b
        if e.op == ">":
            return a > b
        return a >= b
    if isinstance(e, Call):
        args = [_eval_expr(ctx, m, a) for a in e.args]
        f = e.func
        if f == "PGT":
            return prob_mass(_as_dist(args[0], e), _as_number(args[1], e), math.inf)
        if f == "PBETWEEN":
            return prob_mass(
                _as_dist(args[0], e), _as_number(args[1], e), _as_number(args[2], e)
            )
        if f == "CDF":
            return dist_cdf(_as_dist(args[0], e), _as_number(args[1], e))
        if f == "JSD":
            return jsd_auto(_as_dist(args[0], e), _as_dist(args[1], e))
        if f == "CONV":
            return convolve(_as_dist(args[0], e), _as_dist(args[1], e))
        if f == "FUSE":
            return fuse(_as_dist(args[0], e), _as_dist(args[1], e))
        if f == "MEAN":
            return mean_of(_as_dist(args[0], e))
        if f == "VAR":
            return variance_of(_as_dist(args[0], e))
        raise EvalTypeError(f"unknown builtin {f}")
    raise TypeError(f"not an expression: {e!r}")


# --- Monte Carlo filter recognition ---------------------------------------------


def _mc_filter_shape(e: Expr) -> Optional[tuple[str, float, str, float]]:
    """Match FILTER(PGT(?v, c) >= theta) (or >): the threshold-decision shape."""
    if not (isinstance(e, Cmp) and e.op in (">=", ">")):
        return None
    lhs, rhs = e.left, e.right
    if not (isinstance(lhs, Call) and lhs.func == "PGT"):
        return None
    if not (isinstance(lhs.args[0], VarRef) and isinstance(lhs.args[1], Const)):
        return None
    if not (isinstance(rhs, Const) and isinstance(rhs.value, float)):
        return None
    c = lhs.args[1].value
    if not isinstance(c, float):
        return None
    return (lhs.args[0].name, c, e.op, rhs.value)


def _mc_seed(base_seed: int, dist, c: float, theta: float) -> int:
    """Content-derived stream id: independent of plan shape and row order."""
    text = f"{format_distribution(dist)}|{c:.17g}|{theta:.17g}"
    h = hashlib.sha256(text.encode("utf-8")).digest()
    mix = (base_seed * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    return int.from_bytes(h[:8], "big") ^ mix


# --- operators ------------------------------------------------------------------


def _compatible(a: dict[str, Term], b: dict[str, Term]) -> bool:
    if len(b) < len(a):
        a, b = b, a
    for k, v in a.items():
        w = b.get(k)
        if w is not None and w != v:
            return False
    return True


def _dom_overlap(a: dict[str, Term], b: dict[str, Term]) -> bool:
    if len(b) < len(a):
        a, b = b, a
    return any(k in b for k in a)


def _merge(l: dict[str, Term], r: dict[str, Term]) -> dict[str, Term]:
    out = dict(l)
    out.update(r)
    return out


def _eval_op(ctx: _Ctx, op) -> list[SolutionMapping]:
    if isinstance(op, IndexScan):
        out = []
        lineage_mode = ctx.mode == "lineage"
        triples = ctx.graph.triples
        for binding, tid in ctx.graph.match(op.pattern):
            p = triples[tid].p_exist
            if ctx.active is not None and p < 1.0 and tid not in ctx.active:
                continue
            lin = Var(tid) if (lineage_mode and p < 1.0) else ONE
            out.append(SolutionMapping({v.name: t for v, t in binding.items()}, lin))
        return out

    if isinstance(op, TableOp):
        return [SolutionMapping({}, ONE)]

    if isinstance(op, HashJoin):
        lefts = _eval_op(ctx, op.left)
        rights = _eval_op(ctx, op.right)
        shared = sorted(certain_vars(op.left) & certain_vars(op.right))
        out = []
        if shared:
            table: dict[tuple, list[SolutionMapping]] = {}
            for r in rights:
                key = tuple(r.bindings[v] for v in shared)
                table.setdefault(key, []).append(r)
            for l in lefts:
                key = tuple(l.bindings[v] for v in shared)
                for r in table.get(key, ()):
                    if _compatible(l.bindings, r.bindings):
                        out.append(
                            SolutionMapping(
                                _merge(l.bindings, r.bindings),
                                times_of((l.lineage, r.lineage)),
                            )
                        )
        else:
            for l in lefts:
                for r in rights:
                    if _compatible(l.bindings, r.bindings):
                        out.append(
                            SolutionMapping(
                                _merge(l.bindings, r.bindings),
                                times_of((l.lineage, r.lineage)),
                            )
                        )
        return out

    if isinstance(op, FilterOp):
        rows = _eval_op(ctx, op.child)
        shape = None
        if ctx.opts.strategy != "closed":
            shape = _mc_filter_shape(op.expr)
        out = []
        if shape is not None:
            var, c, cmp_op, theta = shape
            cfg = ctx.opts.sampler if ctx.opts.sampler is not None else SamplerConfig()
            for m in rows:
                try:
                    t = m.bindings.get(var)
                    if t is None:
                        raise EvalTypeError(f"unbound variable ?{var}")
                    d = _as_dist(_term_value(t), op.expr)
                    cfg_row = replace(
                        cfg,
                        strategy=ctx.opts.strategy,
                        seed=_mc_seed(ctx.opts.seed, d, c, theta),
                    )
                    decision = mc_threshold(d, c, theta, cfg_row)
                except ProbKgError:
                    ctx.warnings["filter_error"] += 1
                    continue
                ctx.decisions.append((fmt_expr(op.expr), decision))
                if decision.verdict == ABOVE:
                    out.append(m)
                elif decision.verdict == UNDECIDED:
                    ctx.warnings["mc_undecided"] += 1
            return out
        for m in rows:
            try:
                v = _eval_expr(ctx, m, op.expr)
                if v is not True and v is not False:
                    raise EvalTypeError(f"filter is not boolean: {fmt_expr(op.expr)}")
                keep = v is True
            except ProbKgError:
                ctx.warnings["filter_error"] += 1
                keep = False
            if keep:
                out.append(m)
        return out

    if isinstance(op, BindOp):
        out = []
        for m in _eval_op(ctx, op.child):
            try:
                v = _eval_expr(ctx, m, op.expr)
                t = _value_to_term(v, op.expr)
            except ProbKgError:
                ctx.warnings["bind_error"] += 1
                continue
            b = dict(m.bindings)
            b[op.var] = t
            out.append(SolutionMapping(b, m.lineage))
        return out

    if isinstance(op, UnionOp):
        return _eval_op(ctx, op.left) + _eval_op(ctx, op.right)

    if isinstance(op, LeftJoinOp):
        lefts = _eval_op(ctx, op.left)
        rights = _eval_op(ctx, op.right)
        out = []
        for l in lefts:
            compat = [r for r in rights if _compatible(l.bindings, r.bindings)]
            if ctx.mode == "lineage":
                for r in compat:
                    out.append(
                        SolutionMapping(
                            _merge(l.bindings, r.bindings),
                            times_of((l.lineage, r.lineage)),
                        )
                    )
                out.append(
                    SolutionMapping(
                        dict(l.bindings),
                        monus_of(l.lineage, plus_of(r.lineage for r in compat)),
                    )
                )
            else:
                if compat:
                    for r in compat:
                        out.append(
                            SolutionMapping(_merge(l.bindings, r.bindings), ONE)
                        )
                else:
                    out.append(SolutionMapping(dict(l.bindings), ONE))
        return out

    if isinstance(op, MinusOp):
        lefts = _eval_op(ctx, op.left)
        rights = _eval_op(ctx, op.right)
        out = []
        for l in lefts:
            removers = [
                r
                for r in rights
                if _dom_overlap(l.bindings, r.bindings)
                and _compatible(l.bindings, r.bindings)
            ]
            if ctx.mode == "lineage":
                out.append(
                    SolutionMapping(
                        dict(l.bindings),
                        monus_of(l.lineage, plus_of(r.lineage for r in removers)),
                    )
                )
            elif not removers:
                out.append(l)
        return out

    if isinstance(op, SimJoinOp):
        return _eval_simjoin_op(ctx, op)

    raise TypeError(f"not a physical operator: {op!r}")


def _eval_simjoin_op(ctx: _Ctx, op: SimJoinOp) -> list[SolutionMapping]:
    lefts = _eval_op(ctx, op.left)
    rights = _eval_op(ctx, op.right)
    stats = SimJoinStats()
    ctx.sj_stats.append(stats)
    out = []
    for l in lefts:
        for r in rights:
            stats.candidates += 1
            try:
                a = _as_dist(_term_value(l.bindings[op.var_a]), VarRef(op.var_a)) if op.var_a in l.bindings else None
                b = _as_dist(_term_value(r.bindings[op.var_b]), VarRef(op.var_b)) if op.var_b in r.bindings else None
                if a is None or b is None:
                    raise EvalTypeError("similarity variable unbound")
                keep = _pair_within(ctx, op, a, b, stats)
            except ProbKgError:
                stats.mismatches += 1
                ctx.warnings["simjoin_excluded"] += 1
                continue
            if keep:
                stats.survivors += 1
                out.append(
                    SolutionMapping(
                        _merge(l.bindings, r.bindings),
                        times_of((l.lineage, r.lineage)),
                    )
                )
    return out


def _pair_within(ctx: _Ctx, op: SimJoinOp, a, b, stats: SimJoinStats) -> bool:
    """Bound-then-quadrature test for one candidate pair, cached by content."""
    if family_of(a) != family_of(b):
        raise FamilyMismatch(f"cannot compare {family_of(a)} with {family_of(b)}")
    ka, kb = format_distribution(a), format_distribution(b)
    if kb < ka:
        ka, kb, a, b = kb, ka, b, a
    key = (ka, kb, op.theta, op.grid, op.bins)
    hit = ctx._jsd_cache.get(key)
    if hit is not None:
        verdict, was_pruned = hit
        if was_pruned:
            stats.pruned += 1
        return verdict
    try:
        grid = op.grid if op.grid is not None else pooled_grid(a, b, bins=op.bins)
        bound = jsd_lower_bound(a, b, grid)
    except BadGrid:
        bound = 0.0  # degenerate pair: skip pruning, fall through to quadrature
    if bound > op.theta + _PRUNE_MARGIN:
        stats.pruned += 1
        ctx._jsd_cache[key] = (False, True)
        return False
    full = jsd(a, b, method="quadrature")
    verdict = full <= op.theta
    ctx._jsd_cache[key] = (verdict, False)
    return verdict


# --- driver ---------------------------------------------------------------------


def _sort_key(select_vars: tuple[str, ...], m: SolutionMapping):
    proj = tuple(
        term_sort_key(m.bindings[v]) if v in m.bindings else () for v in select_vars
    )
    full = tuple(
        (k, serialize_term(t)) for k, t in sorted(m.bindings.items())
    )
    return (proj, full, fmt_lineage(m.lineage))


def evaluate(
    plan: Plan,
    graph: Graph,
    mode: str = "lineage",
    active: Optional[frozenset[int]] = None,
) -> EvalResult:
    """Run the plan; bag semantics, deterministic order (sorted by bindings)."""
    if mode not in ("lineage", "plain"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    ctx = _Ctx(graph, plan.options, mode, active)
    rows = _eval_op(ctx, plan.root)
    rows.sort(key=lambda m: _sort_key(plan.select_vars, m))
    projected = [
        SolutionMapping(
            {v: m.bindings[v] for v in plan.select_vars if v in m.bindings},
            m.lineage,
        )
        for m in rows
    ]
    return EvalResult(
        projected,
        dict(ctx.warnings),
        ctx.sj_stats,
        ctx.decisions,
    )
