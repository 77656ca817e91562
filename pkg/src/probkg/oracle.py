"""Brute-force and high-precision references the rest of the engine is
tested against.

World enumeration runs the deterministic evaluator (lineage disabled) once
per subset of uncertain triples and accumulates subset weights per distinct
answer with compensated summation.  Probability computation here never
touches lineage, circuits, or lifted plans — those are the systems under
test.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .circuits import BayesNet
from .distributions import Gmm, Histogram, pdf_values
from .errors import IncompleteAssignment, TooManyWorlds
from .query.ast import Query
from .query.planner import PlanOptions, plan
from .query.evaluator import evaluate
from .store import Graph, serialize_term

WORLD_LIMIT = 20

AnswerKey = tuple[tuple[str, str], ...]  # ((var, serialized term), ...) sorted


@dataclass(frozen=True)
class WorldReport:
    probabilities: dict[AnswerKey, float]
    worlds_evaluated: int


class _Kahan:
    __slots__ = ("s", "c")

    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, x: float) -> None:
        y = x - self.c
        t = self.s + y
        self.c = (t - self.s) - y
        self.s = t


def answer_key(bindings: dict) -> AnswerKey:
    return tuple(sorted((v, serialize_term(t)) for v, t in bindings.items()))


def _distinct_answers(pl, graph: Graph, active: frozenset[int]) -> set[AnswerKey]:
    res = evaluate(pl, graph, mode="plain", active=active)
    return {answer_key(m.bindings) for m in res.mappings}


def enumerate_worlds(graph: Graph, ast: Query) -> WorldReport:
    """Exact per-answer probabilities by summing over all possible worlds."""
    uncertain = [tid for tid, t in enumerate(graph.triples) if t.p_exist < 1.0]
    n = len(uncertain)
    if n > WORLD_LIMIT:
        raise TooManyWorlds(n, WORLD_LIMIT)
    pl = plan(ast, PlanOptions(pushdown=False), graph)
    acc: dict[AnswerKey, _Kahan] = {}
    probs = [graph.triples[tid].p_exist for tid in uncertain]
    for mask in range(1 << n):
        weight = 1.0
        alive = []
        for i in range(n):
            if mask >> i & 1:
                weight *= probs[i]
                alive.append(uncertain[i])
            else:
                weight *= 1.0 - probs[i]
        if weight == 0.0:
            continue
        for key in _distinct_answers(pl, graph, frozenset(alive)):
            acc.setdefault(key, _Kahan()).add(weight)
    return WorldReport({k: v.s for k, v in sorted(acc.items())}, 1 << n)


def world_weight_total(graph: Graph) -> float:
    """Sum of all world weights (a normalization check; must be 1)."""
    uncertain = [t.p_exist for t in graph.triples if t.p_exist < 1.0]
    n = len(uncertain)
    if n > WORLD_LIMIT:
        raise TooManyWorlds(n, WORLD_LIMIT)
    k = _Kahan()
    for mask in range(1 << n):
        w = 1.0
        for i, p in enumerate(uncertain):
            w *= p if (mask >> i & 1) else 1.0 - p
        k.add(w)
    return k.s


# --- high-precision divergence reference -------------------------------------------


def _envelope(d) -> tuple[float, float, list[float]]:
    if isinstance(d, Gmm):
        mus = np.array([c.mean[0] for c in d.components])
        sig = np.sqrt(np.array([c.var[0] for c in d.components]))
        return float(np.min(mus - 10 * sig)), float(np.max(mus + 10 * sig)), [float(m) for m in mus]
    if isinstance(d, Histogram):
        e = list(map(float, d.edges))
        return e[0], e[-1], e
    raise TypeError("quad_jsd supports 1-d mixture or histogram inputs")


def quad_jsd(a, b) -> float:
    """Adaptive-quadrature divergence at 1e-12 tolerance (the jsd oracle)."""
    lo_a, hi_a, pts_a = _envelope(a)
    lo_b, hi_b, pts_b = _envelope(b)
    lo, hi = min(lo_a, lo_b), max(hi_a, hi_b)
    points = sorted({p for p in pts_a + pts_b if lo < p < hi})

    def integrand(x: float) -> float:
        xs = np.array([x])
        pa = float(pdf_values(a, xs)[0])
        pb = float(pdf_values(b, xs)[0])
        m = 0.5 * (pa + pb)
        out = 0.0
        if pa > 0.0 and m > 0.0:
            out += 0.5 * pa * math.log(pa / m)
        if pb > 0.0 and m > 0.0:
            out += 0.5 * pb * math.log(pb / m)
        return out

    val, _err = quad(
        integrand,
        lo,
        hi,
        epsabs=1e-12,
        epsrel=1e-12,
        points=points or None,
        limit=500,
    )
    return max(0.0, float(val))


# --- Bayesian-network references ----------------------------------------------------


def bn_joint(bn: BayesNet, assignment: dict[str, bool]) -> float:
    """Joint probability of one complete assignment (CPT chain product)."""
    for n in bn.nodes:
        if n.name not in assignment:
            raise IncompleteAssignment(f"node {n.name} not assigned")
    p = 1.0
    for n in bn.nodes:
        idx = 0
        for parent in n.parents:
            idx = (idx << 1) | (0 if assignment[parent] else 1)
        row = n.cpt[idx]
        p *= row[0] if assignment[n.name] else row[1]
    return p


def bn_marginal(bn: BayesNet, node: str, value: bool) -> float:
    """Marginal by exhaustive joint summation."""
    names = [n.name for n in bn.nodes]
    if node not in names:
        raise IncompleteAssignment(f"unknown node {node}")
    k = _Kahan()
    for values in itertools.product((True, False), repeat=len(names)):
        asg = dict(zip(names, values))
        if asg[node] == value:
            k.add(bn_joint(bn, asg))
    return k.s


def enumerate_worlds_joint(graph: Graph, ast: Query, bn: BayesNet) -> WorldReport:
    """World enumeration when some triples' existence follows the network.

    Worlds factor as (network assignment) x (subset of unbound uncertain
    triples); a bound triple is alive exactly when its node is true.
    """
    bound_tids = set(bn.binding.values())
    uncertain = [
        tid
        for tid, t in enumerate(graph.triples)
        if t.p_exist < 1.0 and tid not in bound_tids
    ]
    names = [n.name for n in bn.nodes]
    n_free = len(uncertain)
    if n_free + len(names) > WORLD_LIMIT:
        raise TooManyWorlds(n_free + len(names), WORLD_LIMIT)
    pl = plan(ast, PlanOptions(pushdown=False), graph)
    acc: dict[AnswerKey, _Kahan] = {}
    probs = [graph.triples[tid].p_exist for tid in uncertain]
    for values in itertools.product((True, False), repeat=len(names)):
        asg = dict(zip(names, values))
        w_bn = bn_joint(bn, asg)
        if w_bn == 0.0:
            continue
        alive_bound = frozenset(
            tid for name, tid in bn.binding.items() if asg[name]
        )
        for mask in range(1 << n_free):
            weight = w_bn
            alive = set(alive_bound)
            for i in range(n_free):
                if mask >> i & 1:
                    weight *= probs[i]
                    alive.add(uncertain[i])
                else:
                    weight *= 1.0 - probs[i]
            if weight == 0.0:
                continue
            for key in _distinct_answers(pl, graph, frozenset(alive)):
                acc.setdefault(key, _Kahan()).add(weight)
    return WorldReport(
        {k: v.s for k, v in sorted(acc.items())},
        (1 << n_free) * (1 << len(names)),
    )
