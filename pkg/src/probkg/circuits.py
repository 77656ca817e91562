"""Triple-level inference: d-DNNF compilation, weighted model counting,
safe-plan lifted inference, and Bayesian-network CNF encoding.

The compiler is exhaustive search with three standard devices: a
most-frequent-variable decision heuristic (OrNode with the two conditioned
branches), independent-component splitting at conjunctions (AndNode), and
memoization keyed by the canonical serialized sub-formula (the formula
constructors already apply unit propagation and sorted normalization, so
structural identity is the cache key).

``wmc`` runs one bottom-up pass.  Circuits here are not smoothed, so the
pass accounts for variables a branch dropped (because conditioning made
the formula insensitive to them) by multiplying in ``w_pos + w_neg`` per
dropped variable, computed from the recorded per-node variable sets.  For
probability weights (p, 1-p) these factors are 1 and the pass degenerates
to the familiar sum-product; for indicator weights (1, 1) — the Bayesian
network encoding — they make evidence-by-weight-zeroing exact.
"""

from __future__ import annotations

import itertools
import re
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union as TypingUnion

from .errors import (
    CyclicNetwork,
    MalformedCpt,
    MissingWeight,
    ProbKgError,
    Timeout,
    VarLimitExceeded,
)
from .lineage import (
    FALSE,
    TRUE,
    And,
    BoolFormula,
    Lit,
    Or,
    and_of,
    condition,
    formula_vars,
    lit,
    or_of,
)
from .store import Graph, Iri, TriplePattern, Variable

DEFAULT_VAR_LIMIT = 4096
DEFAULT_BUDGET_S = 30.0

# --- d-DNNF ---------------------------------------------------------------------

# node encodings: ("true",) ("false",) ("leaf", var, positive)
#                 ("and", child_ids) ("or", decision_var, hi_id, lo_id)


@dataclass(frozen=True)
class DDnnf:
    nodes: tuple[tuple, ...]
    varsets: tuple[frozenset[int], ...]
    root: int

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


class _Builder:
    def __init__(self):
        self.nodes: list[tuple] = [("true",), ("false",)]
        self.varsets: list[frozenset[int]] = [frozenset(), frozenset()]
        self.unique: dict[tuple, int] = {}

    TRUE_ID = 0
    FALSE_ID = 1

    def _add(self, key: tuple, node: tuple, vs: frozenset[int]) -> int:
        nid = self.unique.get(key)
        if nid is None:
            nid = len(self.nodes)
            self.nodes.append(node)
            self.varsets.append(vs)
            self.unique[key] = nid
        return nid

    def leaf(self, var: int, positive: bool) -> int:
        return self._add(("l", var, positive), ("leaf", var, positive), frozenset((var,)))

    def and_(self, children: Iterable[int]) -> int:
        kids = sorted(set(children))
        if self.FALSE_ID in kids:
            return self.FALSE_ID
        kids = [k for k in kids if k != self.TRUE_ID]
        if not kids:
            return self.TRUE_ID
        if len(kids) == 1:
            return kids[0]
        key = ("a", tuple(kids))
        vs = frozenset().union(*(self.varsets[k] for k in kids))
        return self._add(key, ("and", tuple(kids)), vs)

    def or_(self, var: int, hi: int, lo: int) -> int:
        if hi == lo:
            # both phases agree: the formula is insensitive to var here
            return hi
        key = ("o", var, hi, lo)
        vs = frozenset((var,)) | self.varsets[hi] | self.varsets[lo]
        return self._add(key, ("or", var, hi, lo), vs)

    def freeze(self, root: int) -> DDnnf:
        return DDnnf(tuple(self.nodes), tuple(self.varsets), root)


class CircuitCache:
    """Cross-query circuit cache keyed by canonical formula serialization."""

    def __init__(self):
        self._store: dict[str, DDnnf] = {}
        self.hits = 0
        self.misses = 0

    def get(self, f: BoolFormula) -> Optional[DDnnf]:
        c = self._store.get(f.skey)
        if c is None:
            self.misses += 1
        else:
            self.hits += 1
        return c

    def put(self, f: BoolFormula, c: DDnnf) -> None:
        self._store[f.skey] = c

    def __len__(self) -> int:
        return len(self._store)


def _count_occurrences(f: BoolFormula, counts: dict[int, int]) -> None:
    if isinstance(f, Lit):
        counts[f.var] = counts.get(f.var, 0) + 1
    elif isinstance(f, (And, Or)):
        for c in f.children:
            _count_occurrences(c, counts)


def _split_components(f: And) -> list[BoolFormula]:
    """Partition an And's children into variable-disjoint groups."""
    children = f.children
    parent = list(range(len(children)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    seen: dict[int, int] = {}
    for i, c in enumerate(children):
        for v in formula_vars(c):
            if v in seen:
                ra, rb = find(seen[v]), find(i)
                if ra != rb:
                    parent[rb] = ra
            else:
                seen[v] = i
    groups: dict[int, list[BoolFormula]] = {}
    for i, c in enumerate(children):
        groups.setdefault(find(i), []).append(c)
    return [and_of(g) for _, g in sorted(groups.items())]


def compile(
    f: BoolFormula,
    var_limit: int = DEFAULT_VAR_LIMIT,
    budget_s: float = DEFAULT_BUDGET_S,
    use_cache: bool = True,
    circuit_cache: Optional[CircuitCache] = None,
) -> DDnnf:
    """Compile an NNF formula to d-DNNF by exhaustive decision search.

    ``use_cache`` toggles the per-call sub-formula memo (kept switchable so
    the cache-soundness property can be tested).  ``circuit_cache`` is the
    optional cross-query cache: whole-formula hits skip compilation.
    """
    if circuit_cache is not None:
        hit = circuit_cache.get(f)
        if hit is not None:
            return hit
    n = len(formula_vars(f))
    if n > var_limit:
        raise VarLimitExceeded(f"{n} variables exceeds the limit of {var_limit}")
    deadline = time.monotonic() + budget_s
    b = _Builder()
    memo: dict[BoolFormula, int] = {}
    calls = 0

    def rec(g: BoolFormula) -> int:
        nonlocal calls
        calls += 1
        if calls % 256 == 0 and time.monotonic() > deadline:
            raise Timeout(budget_s)
        if g is TRUE:
            return b.TRUE_ID
        if g is FALSE:
            return b.FALSE_ID
        if isinstance(g, Lit):
            return b.leaf(g.var, g.positive)
        if use_cache:
            nid = memo.get(g)
            if nid is not None:
                return nid
        if isinstance(g, And):
            parts = _split_components(g)
            if len(parts) > 1:
                nid = b.and_(rec(p) for p in parts)
                if use_cache:
                    memo[g] = nid
                return nid
        counts: dict[int, int] = {}
        _count_occurrences(g, counts)
        best = max(sorted(counts), key=lambda v: counts[v])
        hi = rec(condition(g, {best: True}))
        lo = rec(condition(g, {best: False}))
        nid = b.or_(best, hi, lo)
        if use_cache:
            memo[g] = nid
        return nid

    root = rec(f)
    circuit = b.freeze(root)
    if circuit_cache is not None:
        circuit_cache.put(f, circuit)
    return circuit


def wmc(
    c: DDnnf,
    weights: dict[int, tuple[float, float]],
    universe: Optional[Iterable[int]] = None,
) -> float:
    """Weighted model count in one bottom-up pass (see module docstring).

    ``universe`` widens the count to variables beyond those the root
    mentions (each contributes ``w_pos + w_neg``); pass it when weights do
    not sum to 1 per variable and the intended variable set is larger than
    the formula's — e.g. network encodings."""

    def wsum(var: int) -> float:
        w = weights.get(var)
        if w is None:
            raise MissingWeight(var)
        return w[0] + w[1]

    vals = [0.0] * len(c.nodes)
    for i, node in enumerate(c.nodes):
        kind = node[0]
        if kind == "true":
            vals[i] = 1.0
        elif kind == "false":
            vals[i] = 0.0
        elif kind == "leaf":
            _, var, positive = node
            w = weights.get(var)
            if w is None:
                raise MissingWeight(var)
            vals[i] = w[0] if positive else w[1]
        elif kind == "and":
            acc = 1.0
            for k in node[1]:
                acc *= vals[k]
            vals[i] = acc
        else:  # or
            _, var, hi, lo = node
            w = weights.get(var)
            if w is None:
                raise MissingWeight(var)
            scope = c.varsets[i]
            hi_gap = lo_gap = 1.0
            hi_vars = c.varsets[hi]
            lo_vars = c.varsets[lo]
            if len(hi_vars) + 1 != len(scope):
                for u in scope:
                    if u != var and u not in hi_vars:
                        hi_gap *= wsum(u)
            if len(lo_vars) + 1 != len(scope):
                for u in scope:
                    if u != var and u not in lo_vars:
                        lo_gap *= wsum(u)
            vals[i] = w[0] * vals[hi] * hi_gap + w[1] * vals[lo] * lo_gap
    out = vals[c.root]
    if universe is not None:
        mentioned = c.varsets[c.root]
        for u in universe:
            if u not in mentioned:
                out *= wsum(u)
    return out


def model_count(c: DDnnf, n_vars: Optional[int] = None) -> float:
    """Number of satisfying assignments over ``n_vars`` variables."""
    mentioned = c.varsets[c.root]
    weights = {v: (0.5, 0.5) for v in mentioned}
    p = wmc(c, weights)
    n = n_vars if n_vars is not None else len(mentioned)
    return p * (2.0 ** n)


@dataclass(frozen=True)
class CircuitReport:
    ok: bool
    violations: tuple[str, ...] = ()


def verify_circuit(c: DDnnf) -> CircuitReport:
    """Check decomposability of every AndNode and determinism of every OrNode."""
    violations: list[str] = []
    for i, node in enumerate(c.nodes):
        kind = node[0]
        if kind == "and":
            total = 0
            union: set[int] = set()
            for k in node[1]:
                total += len(c.varsets[k])
                union |= c.varsets[k]
            if len(union) != total:
                violations.append(f"node {i}: AndNode children share variables")
        elif kind == "or":
            _, var, hi, lo = node
            if var in c.varsets[hi] or var in c.varsets[lo]:
                violations.append(
                    f"node {i}: OrNode branches mention decision variable {var}"
                )
    return CircuitReport(not violations, tuple(violations))


# --- circuit text format ----------------------------------------------------------


def format_circuit(c: DDnnf) -> str:
    """Node-per-line text form: header then T / F / L var phase / A k ids / O var hi lo."""
    lines = [f"ddnnf {len(c.nodes)} {c.root}"]
    for node in c.nodes:
        kind = node[0]
        if kind == "true":
            lines.append("T")
        elif kind == "false":
            lines.append("F")
        elif kind == "leaf":
            lines.append(f"L {node[1]} {1 if node[2] else 0}")
        elif kind == "and":
            lines.append("A " + str(len(node[1])) + " " + " ".join(map(str, node[1])))
        else:
            lines.append(f"O {node[1]} {node[2]} {node[3]}")
    return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> DDnnf:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("ddnnf"):
        raise ProbKgError("circuit text must start with a 'ddnnf' header")
    parts = lines[0].split()
    if len(parts) != 3:
        raise ProbKgError("malformed circuit header")
    n, root = int(parts[1]), int(parts[2])
    if len(lines) - 1 != n:
        raise ProbKgError(f"expected {n} circuit nodes, found {len(lines) - 1}")
    nodes: list[tuple] = []
    varsets: list[frozenset[int]] = []
    for idx, ln in enumerate(lines[1:]):
        toks = ln.split()
        tag = toks[0]
        if tag == "T":
            nodes.append(("true",))
            varsets.append(frozenset())
        elif tag == "F":
            nodes.append(("false",))
            varsets.append(frozenset())
        elif tag == "L":
            var, phase = int(toks[1]), toks[2]
            nodes.append(("leaf", var, phase == "1"))
            varsets.append(frozenset((var,)))
        elif tag == "A":
            k = int(toks[1])
            kids = tuple(int(x) for x in toks[2 : 2 + k])
            if len(kids) != k or any(j >= idx for j in kids):
                raise ProbKgError(f"bad AndNode at line {idx + 2}")
            nodes.append(("and", kids))
            varsets.append(frozenset().union(*(varsets[j] for j in kids)))
        elif tag == "O":
            var, hi, lo = int(toks[1]), int(toks[2]), int(toks[3])
            if hi >= idx or lo >= idx:
                raise ProbKgError(f"bad OrNode at line {idx + 2}")
            nodes.append(("or", var, hi, lo))
            varsets.append(frozenset((var,)) | varsets[hi] | varsets[lo])
        else:
            raise ProbKgError(f"unknown circuit node tag {tag!r} at line {idx + 2}")
    if not 0 <= root < len(nodes):
        raise ProbKgError("circuit root out of range")
    return DDnnf(tuple(nodes), tuple(varsets), root)


# --- CNF ------------------------------------------------------------------------


@dataclass(frozen=True)
class Cnf:
    num_vars: int
    clauses: tuple[tuple[int, ...], ...]
    weights: dict[int, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for cl in self.clauses:
            for l in cl:
                if l == 0 or abs(l) > self.num_vars:
                    raise ProbKgError(f"literal {l} out of range in CNF")
        for v in self.weights:
            if not 1 <= v <= self.num_vars:
                raise ProbKgError(f"weighted variable {v} out of range")

    def to_formula(self) -> BoolFormula:
        return and_of(
            or_of(lit(abs(l), l > 0) for l in cl) for cl in self.clauses
        )


def format_dimacs(cnf: Cnf) -> str:
    lines = [f"p cnf {cnf.num_vars} {len(cnf.clauses)}"]
    for v in sorted(cnf.weights):
        wp, wn = cnf.weights[v]
        lines.append(f"c w {v} {wp:.17g} {wn:.17g}")
    for cl in cnf.clauses:
        lines.append(" ".join(map(str, cl)) + " 0")
    return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> Cnf:
    num_vars = None
    clauses: list[tuple[int, ...]] = []
    weights: dict[int, tuple[float, float]] = {}
    pending: list[int] = []
    for raw in text.splitlines():
        ln = raw.strip()
        if not ln:
            continue
        if ln.startswith("c"):
            toks = ln.split()
            if len(toks) == 5 and toks[1] == "w":
                weights[int(toks[2])] = (float(toks[3]), float(toks[4]))
            continue
        if ln.startswith("p"):
            toks = ln.split()
            if len(toks) != 4 or toks[1] != "cnf":
                raise ProbKgError(f"malformed problem line: {ln!r}")
            num_vars = int(toks[2])
            continue
        for tok in ln.split():
            l = int(tok)
            if l == 0:
                clauses.append(tuple(pending))
                pending = []
            else:
                pending.append(l)
    if pending:
        clauses.append(tuple(pending))
    if num_vars is None:
        raise ProbKgError("missing 'p cnf' problem line")
    return Cnf(num_vars, tuple(clauses), weights)


def parse_formula(text: str) -> BoolFormula:
    """Tiny formula reader for tests/CLI: x<int>, ~, &, |, parentheses, T, F."""
    tokens = re.findall(r"x\d+|[~&|()]|T|F|\S", text)
    pos = 0

    def peek() -> Optional[str]:
        return tokens[pos] if pos < len(tokens) else None

    def take() -> str:
        nonlocal pos
        t = tokens[pos]
        pos += 1
        return t

    def primary() -> BoolFormula:
        t = peek()
        if t is None:
            raise ProbKgError("unexpected end of formula")
        if t == "(":
            take()
            e = disjunction()
            if peek() != ")":
                raise ProbKgError("expected ')' in formula")
            take()
            return e
        if t == "~":
            take()
            inner = primary()
            if not isinstance(inner, Lit):
                raise ProbKgError("negation applies to variables only (NNF input)")
            return lit(inner.var, not inner.positive)
        if t == "T":
            take()
            return TRUE
        if t == "F":
            take()
            return FALSE
        if t.startswith("x"):
            take()
            return lit(int(t[1:]), True)
        raise ProbKgError(f"unexpected token {t!r} in formula")

    def conjunction() -> BoolFormula:
        items = [primary()]
        while peek() == "&":
            take()
            items.append(primary())
        return and_of(items)

    def disjunction() -> BoolFormula:
        items = [conjunction()]
        while peek() == "|":
            take()
            items.append(conjunction())
        return or_of(items)

    out = disjunction()
    if peek() is not None:
        raise ProbKgError(f"trailing tokens in formula: {peek()!r}")
    return out


# --- answer probabilities over a graph --------------------------------------------


def triple_weights(graph: Graph, variables: Iterable[int]) -> dict[int, tuple[float, float]]:
    out = {}
    for tid in variables:
        p = graph.triples[tid].p_exist
        out[tid] = (p, 1.0 - p)
    return out


def answer_probability(
    f: BoolFormula,
    graph: Graph,
    circuit_cache: Optional[CircuitCache] = None,
    var_limit: int = DEFAULT_VAR_LIMIT,
    budget_s: float = DEFAULT_BUDGET_S,
) -> float:
    """Marginal probability of one answer's (Plus-merged) Boolean lineage."""
    if f is TRUE:
        return 1.0
    if f is FALSE:
        return 0.0
    c = compile(f, var_limit=var_limit, budget_s=budget_s, circuit_cache=circuit_cache)
    return wmc(c, triple_weights(graph, formula_vars(f)))


# --- safe plans and lifted inference ----------------------------------------------


@dataclass(frozen=True)
class PatternLeaf:
    pattern: TriplePattern


@dataclass(frozen=True)
class IndependentJoin:
    children: tuple["SafeNode", ...]


@dataclass(frozen=True)
class IndependentProject:
    var: str
    child: "SafeNode"


SafeNode = TypingUnion[PatternLeaf, IndependentJoin, IndependentProject]


@dataclass(frozen=True)
class SafePlan:
    root: SafeNode
    head_vars: tuple[str, ...]


@dataclass(frozen=True)
class NotSafe:
    reason: str  # UnsupportedShape | NotHierarchical
    detail: str = ""


def fmt_safe_plan(p: SafePlan) -> str:
    lines: list[str] = []

    def walk(n: SafeNode, depth: int):
        pad = "  " * depth
        if isinstance(n, PatternLeaf):
            t = n.pattern
            def s(x):
                return f"?{x.name}" if isinstance(x, Variable) else str(x)
            lines.append(f"{pad}Leaf {s(t.s)} {s(t.p)} {s(t.o)}")
        elif isinstance(n, IndependentProject):
            lines.append(f"{pad}IndependentProject ?{n.var}")
            walk(n.child, depth + 1)
        else:
            lines.append(f"{pad}IndependentJoin")
            for c in n.children:
                walk(c, depth + 1)

    walk(p.root, 0)
    return "\n".join(lines)


def safe_plan(ast) -> TypingUnion[SafePlan, NotSafe]:
    """Hierarchical-dichotomy classification of a conjunctive query.

    Only self-join-free basic graph patterns are classified: the WHERE tree
    must be a single Bgp with ground, pairwise-distinct predicate IRIs.
    The test is pairwise over all query variables: the sets of patterns
    containing two variables must be nested or disjoint.
    """
    from .query.ast import Bgp  # local import to avoid a package cycle

    w = ast.where
    if not isinstance(w, Bgp) or not w.patterns:
        return NotSafe("UnsupportedShape", "WHERE is not a non-empty basic graph pattern")
    preds = []
    for tp in w.patterns:
        if not isinstance(tp.p, Iri):
            return NotSafe("UnsupportedShape", "non-ground predicate")
        preds.append(tp.p)
    if len(set(preds)) != len(preds):
        return NotSafe("UnsupportedShape", "repeated predicate (self-join)")

    patterns = w.patterns
    occ: dict[str, frozenset[int]] = {}
    for i, tp in enumerate(patterns):
        for v in tp.variables():
            occ[v.name] = occ.get(v.name, frozenset()) | {i}
    names = sorted(occ)
    for a, b in itertools.combinations(names, 2):
        sa, sb = occ[a], occ[b]
        if sa & sb and not (sa <= sb or sb <= sa):
            return NotSafe("NotHierarchical", f"?{a} and ?{b} properly overlap")

    head = tuple(v for v in ast.select_vars if v in occ)

    def build(idxs: frozenset[int], fixed: frozenset[str]) -> SafeNode:
        # split into components connected through non-fixed variables
        idx_list = sorted(idxs)
        parent = {i: i for i in idx_list}

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        seen: dict[str, int] = {}
        for i in idx_list:
            for v in patterns[i].variables():
                if v.name in fixed:
                    continue
                if v.name in seen:
                    ra, rb = find(seen[v.name]), find(i)
                    if ra != rb:
                        parent[rb] = ra
                else:
                    seen[v.name] = i
        comps: dict[int, list[int]] = {}
        for i in idx_list:
            comps.setdefault(find(i), []).append(i)
        groups = [frozenset(c) for _, c in sorted(comps.items())]
        if len(groups) > 1:
            return IndependentJoin(tuple(build(g, fixed) for g in groups))
        comp = groups[0]
        nonfixed = sorted(
            v for v in names if v not in fixed and occ[v] & comp
        )
        if not nonfixed:
            return PatternLeaf(patterns[next(iter(comp))])
        covering = [v for v in nonfixed if occ[v] & comp == comp]
        # a covering variable exists whenever the pairwise test passed
        assert covering, "hierarchical test passed but no covering variable"
        v = covering[0]
        return IndependentProject(v, build(comp, fixed | {v}))

    root = build(frozenset(range(len(patterns))), frozenset(head))
    return SafePlan(root, head)


@dataclass
class _Relation:
    vars: tuple[str, ...]
    rows: dict[tuple, float]  # key: terms ordered by self.vars


def _eval_safe(node: SafeNode, graph: Graph) -> _Relation:
    if isinstance(node, PatternLeaf):
        names = sorted({v.name for v in node.pattern.variables()})
        rows: dict[tuple, float] = {}
        for binding, tid in graph.match(node.pattern):
            by_name = {v.name: t for v, t in binding.items()}
            key = tuple(by_name[n] for n in names)
            rows[key] = graph.triples[tid].p_exist
        return _Relation(tuple(names), rows)
    if isinstance(node, IndependentProject):
        child = _eval_safe(node.child, graph)
        if node.var not in child.vars:
            return child
        keep = tuple(v for v in child.vars if v != node.var)
        pos = [child.vars.index(v) for v in keep]
        grouped: dict[tuple, float] = {}
        for key, p in child.rows.items():
            out_key = tuple(key[i] for i in pos)
            grouped[out_key] = grouped.get(out_key, 1.0) * (1.0 - p)
        return _Relation(keep, {k: 1.0 - q for k, q in grouped.items()})
    if isinstance(node, IndependentJoin):
        rels = [_eval_safe(c, graph) for c in node.children]
        acc = rels[0]
        for r in rels[1:]:
            shared = [v for v in acc.vars if v in r.vars]
            out_vars = acc.vars + tuple(v for v in r.vars if v not in acc.vars)
            r_shared_pos = [r.vars.index(v) for v in shared]
            r_extra_pos = [i for i, v in enumerate(r.vars) if v not in acc.vars]
            a_shared_pos = [acc.vars.index(v) for v in shared]
            index: dict[tuple, list[tuple]] = {}
            for key in r.rows:
                index.setdefault(tuple(key[i] for i in r_shared_pos), []).append(key)
            rows: dict[tuple, float] = {}
            for akey, ap in acc.rows.items():
                probe = tuple(akey[i] for i in a_shared_pos)
                for rkey in index.get(probe, ()):
                    out_key = akey + tuple(rkey[i] for i in r_extra_pos)
                    rows[out_key] = ap * r.rows[rkey]
            acc = _Relation(out_vars, rows)
        return acc
    raise TypeError(f"not a safe-plan node: {node!r}")


def lifted_eval(plan: SafePlan, graph: Graph) -> dict[tuple, float]:
    """Per-answer probabilities without compilation.

    Keys are tuples of (variable, term) pairs in the plan's head-variable
    order; the boolean query yields the single key ().
    """
    rel = _eval_safe(plan.root, graph)
    order = [v for v in plan.head_vars if v in rel.vars]
    pos = [rel.vars.index(v) for v in order]
    out: dict[tuple, float] = {}
    for key, p in rel.rows.items():
        out_key = tuple((v, key[i]) for v, i in zip(order, pos))
        if out_key in out:
            # distinct projected-away terms are impossible: projection
            # happened inside IndependentProject nodes
            raise ProbKgError("safe-plan evaluation produced duplicate answers")
        out[out_key] = p
    return out


# --- Bayesian networks ------------------------------------------------------------


@dataclass(frozen=True)
class BnNode:
    """Boolean network node; CPT rows follow itertools.product((True, False))
    over the parents, each row = (P(true | ctx), P(false | ctx))."""

    name: str
    parents: tuple[str, ...]
    cpt: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class BayesNet:
    nodes: tuple[BnNode, ...]
    binding: dict[str, int] = field(default_factory=dict)  # node name -> triple id

    def __post_init__(self):
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise MalformedCpt("duplicate node names")
        known = set(names)
        for n in self.nodes:
            for p in n.parents:
                if p not in known:
                    raise MalformedCpt(f"node {n.name}: unknown parent {p}")
            want = 2 ** len(n.parents)
            if len(n.cpt) != want:
                raise MalformedCpt(
                    f"node {n.name}: expected {want} CPT rows, got {len(n.cpt)}"
                )
            for row in n.cpt:
                if len(row) != 2:
                    raise MalformedCpt(f"node {n.name}: CPT rows need 2 entries")
                if min(row) < 0.0:
                    raise MalformedCpt(f"node {n.name}: negative CPT entry")
                if abs(row[0] + row[1] - 1.0) > 1e-12:
                    raise MalformedCpt(f"node {n.name}: CPT row does not sum to 1")
        # cycle check (Kahn)
        indeg = {n.name: len(n.parents) for n in self.nodes}
        children: dict[str, list[str]] = {n.name: [] for n in self.nodes}
        for n in self.nodes:
            for p in n.parents:
                children[p].append(n.name)
        queue = [n for n, d in indeg.items() if d == 0]
        seen = 0
        while queue:
            u = queue.pop()
            seen += 1
            for w in children[u]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    queue.append(w)
        if seen != len(self.nodes):
            raise CyclicNetwork("parent relation contains a cycle")

    def index(self, name: str) -> int:
        for i, n in enumerate(self.nodes):
            if n.name == name:
                return i
        raise MalformedCpt(f"unknown node {name}")


def indicator_var(bn: BayesNet, node_idx: int, value: bool) -> int:
    """CNF variable of an indicator: node i gets 2i+1 (true) and 2i+2 (false)."""
    return 2 * node_idx + (1 if value else 2)


def bn_to_cnf(bn: BayesNet) -> Cnf:
    """Weighted-model-counting encoding of the network.

    Indicators come first (two per node), then one parameter variable per
    CPT row entry.  Clauses assert exactly-one indicator per node and the
    biconditional parameter ⟷ (parent context ∧ node indicator).  Weights:
    indicators (1, 1), parameters (entry, 1).
    """
    idx = {n.name: i for i, n in enumerate(bn.nodes)}
    clauses: list[tuple[int, ...]] = []
    weights: dict[int, tuple[float, float]] = {}
    for i in range(len(bn.nodes)):
        t, f = indicator_var(bn, i, True), indicator_var(bn, i, False)
        clauses.append((t, f))
        clauses.append((-t, -f))
        weights[t] = (1.0, 1.0)
        weights[f] = (1.0, 1.0)
    next_var = 2 * len(bn.nodes) + 1
    for i, n in enumerate(bn.nodes):
        contexts = list(itertools.product((True, False), repeat=len(n.parents)))
        for row, ctx in zip(n.cpt, contexts):
            ctx_lits = [
                indicator_var(bn, idx[p], val) for p, val in zip(n.parents, ctx)
            ]
            for value, entry in ((True, row[0]), (False, row[1])):
                theta = next_var
                next_var += 1
                weights[theta] = (entry, 1.0)
                val_lit = indicator_var(bn, i, value)
                for c in ctx_lits:
                    clauses.append((-theta, c))
                clauses.append((-theta, val_lit))
                clauses.append(
                    (theta,) + tuple(-c for c in ctx_lits) + (-val_lit,)
                )
    return Cnf(next_var - 1, tuple(clauses), weights)


def bn_evidence_weights(
    bn: BayesNet, cnf: Cnf, evidence: dict[str, bool]
) -> dict[int, tuple[float, float]]:
    """Weights with indicators contradicting the evidence zeroed out."""
    idx = {n.name: i for i, n in enumerate(bn.nodes)}
    weights = dict(cnf.weights)
    for name, value in evidence.items():
        if name not in idx:
            raise MalformedCpt(f"evidence on unknown node {name}")
        bad = indicator_var(bn, idx[name], not value)
        weights[bad] = (0.0, 1.0)
    return weights


# --- clausification of NNF formulas ----------------------------------------------


def _clause_count(f: BoolFormula, limit: int) -> int:
    """Clauses produced by distribution, saturated at limit+1."""
    if isinstance(f, Lit) or f is FALSE:
        return 1
    if f is TRUE:
        return 0
    if isinstance(f, And):
        total = 0
        for c in f.children:
            total += _clause_count(c, limit)
            if total > limit:
                return limit + 1
        return total
    if isinstance(f, Or):
        total = 1
        for c in f.children:
            total *= max(1, _clause_count(c, limit))
            if total > limit:
                return limit + 1
        return total
    raise TypeError(f"not a formula: {f!r}")


def _distribute(f: BoolFormula) -> list[tuple[int, ...]]:
    if f is TRUE:
        return []
    if f is FALSE:
        return [()]
    if isinstance(f, Lit):
        return [(f.var if f.positive else -f.var,)]
    if isinstance(f, And):
        out: list[tuple[int, ...]] = []
        for c in f.children:
            out.extend(_distribute(c))
        return out
    if isinstance(f, Or):
        parts = [_distribute(c) for c in f.children]
        out = [()]
        for clauses in parts:
            out = [acc + cl for acc in out for cl in clauses]
        return out
    raise TypeError(f"not a formula: {f!r}")


def clausify(
    f: BoolFormula, next_var: int, distribute_limit: int = 64
) -> tuple[list[tuple[int, ...]], dict[int, tuple[float, float]], int]:
    """CNF clauses asserting f, given fresh variables from next_var upward.

    Small formulas distribute directly; larger ones use biconditional
    auxiliary definitions, whose variables get weight (1, 1) so model
    counts project faithfully onto the original variables.

    Returns (clauses, auxiliary weights, next unused variable).
    """
    if _clause_count(f, distribute_limit) <= distribute_limit:
        return _distribute(f), {}, next_var

    clauses: list[tuple[int, ...]] = []
    aux_weights: dict[int, tuple[float, float]] = {}

    def define(g: BoolFormula) -> int:
        nonlocal next_var
        if isinstance(g, Lit):
            return g.var if g.positive else -g.var
        if g is TRUE or g is FALSE:
            a = next_var
            next_var += 1
            aux_weights[a] = (1.0, 1.0)
            clauses.append((a,) if g is TRUE else (-a,))
            return a
        kids = [define(c) for c in g.children]
        a = next_var
        next_var += 1
        aux_weights[a] = (1.0, 1.0)
        if isinstance(g, And):
            for k in kids:
                clauses.append((-a, k))
            clauses.append((a,) + tuple(-k for k in kids))
        else:
            clauses.append((-a,) + tuple(kids))
            for k in kids:
                clauses.append((a, -k))
        return a

    root = define(f)
    clauses.append((root,))
    return clauses, aux_weights, next_var


def _map_formula(f: BoolFormula, mapping: dict[int, int]) -> BoolFormula:
    if isinstance(f, Lit):
        return lit(mapping[f.var], f.positive)
    if isinstance(f, And):
        return and_of(_map_formula(c, mapping) for c in f.children)
    if isinstance(f, Or):
        return or_of(_map_formula(c, mapping) for c in f.children)
    return f


def joint_lineage_bn_cnf(
    f: BoolFormula,
    bn: BayesNet,
    graph: Optional[Graph] = None,
) -> tuple[Cnf, dict[int, int]]:
    """Conjoin an answer's Boolean lineage with the network encoding.

    Each lineage variable (a triple id) becomes a fresh CNF variable.
    Ids bound to a network node are tied to that node's true-indicator by a
    biconditional clause pair and weighted (1, 1) — their probability comes
    from the network.  Unbound ids keep their triple's independent
    existence weight (requires the graph).

    Returns the CNF (formula asserted) and the triple-id → CNF-variable map.
    """
    base = bn_to_cnf(bn)
    idx = {n.name: i for i, n in enumerate(bn.nodes)}
    bound = {tid: name for name, tid in bn.binding.items()}
    clauses = list(base.clauses)
    weights = dict(base.weights)
    next_var = base.num_vars + 1
    mapping: dict[int, int] = {}
    for tid in sorted(formula_vars(f)):
        x = next_var
        next_var += 1
        mapping[tid] = x
        name = bound.get(tid)
        if name is not None:
            lam = indicator_var(bn, idx[name], True)
            clauses.append((-x, lam))
            clauses.append((x, -lam))
            weights[x] = (1.0, 1.0)
        else:
            if graph is None:
                raise ProbKgError(
                    f"triple {tid} is not bound to a network node and no graph given"
                )
            p = graph.triples[tid].p_exist
            weights[x] = (p, 1.0 - p)
    mapped = _map_formula(f, mapping)
    lin_clauses, aux_weights, next_var = clausify(mapped, next_var)
    clauses.extend(lin_clauses)
    weights.update(aux_weights)
    return Cnf(next_var - 1, tuple(clauses), weights), mapping


# --- end-to-end probability routing -------------------------------------------------


def query_probabilities(
    graph: Graph,
    ast,
    options=None,
    *,
    var_limit: int = DEFAULT_VAR_LIMIT,
    budget_s: float = DEFAULT_BUDGET_S,
    circuit_cache: Optional[CircuitCache] = None,
) -> tuple[dict[tuple, float], str]:
    """Per-answer probabilities via the cheapest sound route.

    Queries with a safe plan are evaluated lifted (no compilation); anything
    else runs the lineage-building evaluator and compiles each distinct
    answer's formula.  Returns (answers, route) where answers maps
    ``tuple((name, term-or-None) for name in select_vars)`` to probability
    and route is "lifted" or "compiled".  Answers whose lineage is
    unsatisfiable are dropped.
    """
    from .query.evaluator import evaluate
    from .query.planner import PlanOptions, plan
    from .lineage import plus_of, to_boolean

    sp = safe_plan(ast)
    if isinstance(sp, SafePlan):
        out: dict[tuple, float] = {}
        for key, p in lifted_eval(sp, graph).items():
            bound = dict(key)
            out[tuple((v, bound.get(v)) for v in ast.select_vars)] = p
        return out, "lifted"

    opts = options if options is not None else PlanOptions()
    res = evaluate(plan(ast, opts, graph), graph, mode="lineage")
    by_answer: dict[tuple, list] = {}
    for m in res.mappings:
        key = tuple((v, m.bindings.get(v)) for v in ast.select_vars)
        by_answer.setdefault(key, []).append(m.lineage)
    cache = circuit_cache if circuit_cache is not None else CircuitCache()
    out = {}
    for key, lins in by_answer.items():
        f = to_boolean(plus_of(lins))
        p = answer_probability(
            f, graph, circuit_cache=cache, var_limit=var_limit, budget_s=budget_s
        )
        if p > 0.0:
            out[key] = p
    return out, "compiled"
