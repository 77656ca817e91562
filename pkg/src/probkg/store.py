"""Immutable in-memory probabilistic graph.

Triples are loaded from a line-oriented text format, one statement per line::

    <subject> <predicate> <object-or-literal> [@probability] .

Terms are ``<IRI>``, ``_:label``, ``"lexical"``, ``"lexical"@lang`` or
``"lexical"^^<datatype-IRI>``.  Objects typed ``urn:prob:dist`` carry a
distribution literal in the lexical grammar of :mod:`probkg.distributions`
(``gmm(...)``, ``hist(...)``, ``dir(...)``).  The trailing ``@p`` is an
existence probability in (0,1]; a missing annotation means the triple is
certain.  Lines starting with ``#`` are comments.

The store interns terms into dense integer ids and keeps three sorted
permutation indexes (subject-, predicate- and object-first) built once at
load; pattern matching binary-searches the best index for the bound
positions.  Everything is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import re
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .distributions import (
    Distribution,
    family_of,
    format_distribution,
    parse_distribution,
)
from .errors import (
    BadDistribution,
    BadProbability,
    DuplicateTriple,
    LineParse,
    ProbKgError,
)

#: Datatype id of plain literals (used when ``^^`` is absent).
PLAIN_DATATYPE = "urn:str"
#: Datatype id marking distribution-valued literals.
DIST_DATATYPE = "urn:prob:dist"
#: Datatype id of computed numeric literals (BIND results, twin data).
NUM_DATATYPE = "urn:num"


@dataclass(frozen=True)
class Iri:
    value: str

    def __post_init__(self):
        if not self.value:
            raise ValueError("IRI must be non-empty")


@dataclass(frozen=True)
class BlankNode:
    label: str


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: str = PLAIN_DATATYPE
    lang: Optional[str] = None


@dataclass(frozen=True)
class DistLiteral:
    dist: Distribution


Term = Union[Iri, BlankNode, Literal, DistLiteral]


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class TriplePattern:
    s: Union[Term, Variable]
    p: Union[Term, Variable]
    o: Union[Term, Variable]

    def variables(self) -> tuple[Variable, ...]:
        seen: list[Variable] = []
        for x in (self.s, self.p, self.o):
            if isinstance(x, Variable) and x not in seen:
                seen.append(x)
        return tuple(seen)


@dataclass(frozen=True)
class ProbTriple:
    s: Term
    p: Term
    o: Term
    p_exist: float = 1.0

    def __post_init__(self):
        if isinstance(self.s, (Literal, DistLiteral)):
            raise ValueError("subject must be an IRI or blank node")
        if not isinstance(self.p, Iri):
            raise ValueError("predicate must be an IRI")
        if not 0.0 < self.p_exist <= 1.0:
            raise ValueError("existence probability must be in (0,1]")


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}


def _escape(s: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in s)


def _unescape(s: str, line_no: int) -> str:
    out: list[str] = []
    i = 0
    while i < len(s):
        ch = s[i]
        if ch == "\\":
            if i + 1 >= len(s) or s[i + 1] not in _UNESCAPES:
                raise LineParse(line_no, f"bad escape in literal: {s[i:i+2]!r}")
            out.append(_UNESCAPES[s[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def serialize_term(t: Term) -> str:
    if isinstance(t, Iri):
        return f"<{t.value}>"
    if isinstance(t, BlankNode):
        return f"_:{t.label}"
    if isinstance(t, DistLiteral):
        return f'"{format_distribution(t.dist)}"^^<{DIST_DATATYPE}>'
    if isinstance(t, Literal):
        body = f'"{_escape(t.lexical)}"'
        if t.lang is not None:
            return f"{body}@{t.lang}"
        if t.datatype != PLAIN_DATATYPE:
            return f"{body}^^<{t.datatype}>"
        return body
    raise ValueError(f"not a term: {t!r}")


def term_sort_key(t: Term) -> tuple:
    """Total, deterministic order over terms (drives output ordering)."""
    if isinstance(t, Iri):
        return (0, t.value)
    if isinstance(t, BlankNode):
        return (1, t.label)
    if isinstance(t, Literal):
        return (2, t.datatype, t.lang or "", t.lexical)
    if isinstance(t, DistLiteral):
        return (3, family_of(t.dist), format_distribution(t.dist))
    raise ValueError(f"not a term: {t!r}")


_TOKEN_RE = re.compile(
    r"""\s*(?:
      (?P<iri><[^>]*>)
    | (?P<blank>_:[A-Za-z][A-Za-z0-9_.-]*)
    | (?P<lit>"(?:[^"\\]|\\.)*"(?:\^\^<[^>]*>|@[A-Za-z][A-Za-z0-9-]*)?)
    | (?P<prob>@[^\s]+)
    | (?P<dot>\.)
    )""",
    re.X,
)

_LIT_RE = re.compile(
    r'"(?P<lex>(?:[^"\\]|\\.)*)"(?:\^\^<(?P<dt>[^>]*)>|@(?P<lang>[A-Za-z][A-Za-z0-9-]*))?\Z'
)


def _parse_term(tok: str, kind: str, line_no: int) -> Term:
    if kind == "iri":
        value = tok[1:-1]
        if not value:
            raise LineParse(line_no, "empty IRI")
        return Iri(value)
    if kind == "blank":
        return BlankNode(tok[2:])
    m = _LIT_RE.match(tok)
    if m is None:
        raise LineParse(line_no, f"malformed literal {tok!r}")
    lexical = _unescape(m.group("lex"), line_no)
    dt = m.group("dt")
    lang = m.group("lang")
    if lang is not None:
        return Literal(lexical, PLAIN_DATATYPE, lang)
    if dt == DIST_DATATYPE:
        try:
            return DistLiteral(parse_distribution(lexical))
        except BadDistribution as exc:
            raise LineParse(line_no, str(exc)) from exc
    return Literal(lexical, dt if dt is not None else PLAIN_DATATYPE)


def _parse_line(line: str, line_no: int) -> Optional[ProbTriple]:
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(line):
        if line[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(line, pos)
        if m is None:
            raise LineParse(line_no, f"unrecognized syntax at column {pos + 1}")
        tokens.append((m.lastgroup, m.group(m.lastgroup)))
        pos = m.end()
    if len(tokens) < 4 or tokens[-1][0] != "dot":
        raise LineParse(line_no, "statement must end with '.'")
    body = tokens[:-1]
    prob = 1.0
    if body and body[-1][0] == "prob":
        ptok = body[-1][1][1:]
        try:
            prob = float(ptok)
        except ValueError as exc:
            raise LineParse(line_no, f"malformed probability {ptok!r}") from exc
        if not 0.0 < prob <= 1.0:
            raise BadProbability(line_no, prob)
        body = body[:-1]
    if len(body) != 3:
        raise LineParse(line_no, f"expected 3 terms, found {len(body)}")
    s = _parse_term(body[0][1], body[0][0], line_no)
    p = _parse_term(body[1][1], body[1][0], line_no)
    o = _parse_term(body[2][1], body[2][0], line_no)
    try:
        return ProbTriple(s, p, o, prob)
    except ValueError as exc:
        raise LineParse(line_no, str(exc)) from exc


class Graph:
    """Immutable triple store with interned terms and permutation indexes."""

    def __init__(self, triples: Iterable[ProbTriple]):
        self.triples: tuple[ProbTriple, ...] = tuple(triples)
        self._ids: dict[Term, int] = {}
        self._terms: list[Term] = []
        seen: set[tuple[int, int, int]] = set()
        spo, pos, osp = [], [], []
        for tid, t in enumerate(self.triples):
            key = (self._intern(t.s), self._intern(t.p), self._intern(t.o))
            if key in seen:
                raise ProbKgError(
                    f"duplicate (s,p,o) triple at position {tid}: "
                    f"{serialize_term(t.s)} {serialize_term(t.p)} {serialize_term(t.o)}"
                )
            seen.add(key)
            s, p, o = key
            spo.append((s, p, o, tid))
            pos.append((p, o, s, tid))
            osp.append((o, s, p, tid))
        self._spo = sorted(spo)
        self._pos = sorted(pos)
        self._osp = sorted(osp)

    def _intern(self, t: Term) -> int:
        tid = self._ids.get(t)
        if tid is None:
            tid = len(self._terms)
            self._ids[t] = tid
            self._terms.append(t)
        return tid

    def term_id(self, t: Term) -> Optional[int]:
        return self._ids.get(t)

    @property
    def n_terms(self) -> int:
        return len(self._terms)

    def __len__(self) -> int:
        return len(self.triples)

    # -- pattern matching ------------------------------------------------

    def _candidate_ids(self, pattern: TriplePattern) -> Optional[list[int]]:
        """Triple ids in the best index range for the bound positions, or
        None for a miss on a ground term that was never interned.  The
        chosen index always covers every bound position."""
        ids = []
        for x in (pattern.s, pattern.p, pattern.o):
            if isinstance(x, Variable):
                ids.append(None)
            else:
                i = self._ids.get(x)
                if i is None:
                    return None
                ids.append(i)
        s, p, o = ids
        if s is not None and p is not None and o is not None:
            index, key = self._spo, (s, p, o)
        elif s is not None and p is not None:
            index, key = self._spo, (s, p)
        elif s is not None and o is not None:
            index, key = self._osp, (o, s)
        elif s is not None:
            index, key = self._spo, (s,)
        elif p is not None and o is not None:
            index, key = self._pos, (p, o)
        elif p is not None:
            index, key = self._pos, (p,)
        elif o is not None:
            index, key = self._osp, (o,)
        else:
            return [tid for (_, _, _, tid) in self._spo]
        lo = bisect_left(index, key)
        hi = bisect_left(index, key[:-1] + (key[-1] + 1,))
        return [row[3] for row in index[lo:hi]]

    def match(
        self, pattern: TriplePattern
    ) -> list[tuple[dict[Variable, Term], int]]:
        """All (bindings, triple id) unifying with the pattern, id-ascending.

        Repeated variables must bind the same term in every position."""
        cands = self._candidate_ids(pattern)
        if cands is None:
            return []
        out: list[tuple[dict[Variable, Term], int]] = []
        for tid in sorted(cands):
            t = self.triples[tid]
            binding: dict[Variable, Term] = {}
            ok = True
            for slot, term in ((pattern.s, t.s), (pattern.p, t.p), (pattern.o, t.o)):
                if isinstance(slot, Variable):
                    if slot in binding and binding[slot] != term:
                        ok = False
                        break
                    binding[slot] = term
                elif slot != term:
                    ok = False
                    break
            if ok:
                out.append((binding, tid))
        return out

    def count_matches(self, pattern: TriplePattern) -> int:
        """Exact cardinality of ``match`` (used by the planner)."""
        cands = self._candidate_ids(pattern)
        if cands is None:
            return 0
        n_var_positions = sum(
            isinstance(x, Variable) for x in (pattern.s, pattern.p, pattern.o)
        )
        if len(pattern.variables()) == n_var_positions:
            return len(cands)
        return len(self.match(pattern))


def match(graph: Graph, pattern: TriplePattern):
    return graph.match(pattern)


def parse_graph_file(text: str) -> Graph:
    """Parse the line format; raises LineParse/BadProbability/DuplicateTriple."""
    triples: list[ProbTriple] = []
    seen: dict[tuple[Term, Term, Term], int] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        t = _parse_line(line, line_no)
        if t is None:
            continue
        key = (t.s, t.p, t.o)
        if key in seen:
            raise DuplicateTriple(line_no)
        seen[key] = line_no
        triples.append(t)
    return Graph(triples)


def serialize_graph(graph: Graph) -> str:
    """One statement per line, 17-significant-digit probabilities."""
    lines = []
    for t in graph.triples:
        parts = [serialize_term(t.s), serialize_term(t.p), serialize_term(t.o)]
        if t.p_exist != 1.0:
            parts.append("@" + format(t.p_exist, ".17g"))
        parts.append(".")
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class StatsReport:
    triples: int
    terms: int
    dist_literals: int
    dist_by_family: dict = field(default_factory=dict)
    uncertain_triples: int = 0

    def to_dict(self) -> dict:
        return {
            "triples": self.triples,
            "terms": self.terms,
            "dist_literals": self.dist_literals,
            "dist_by_family": dict(self.dist_by_family),
            "uncertain_triples": self.uncertain_triples,
        }


def graph_stats(graph: Graph) -> StatsReport:
    by_family: dict[str, int] = {}
    n_dist = 0
    uncertain = 0
    for t in graph.triples:
        if isinstance(t.o, DistLiteral):
            n_dist += 1
            fam = family_of(t.o.dist)
            by_family[fam] = by_family.get(fam, 0) + 1
        if t.p_exist < 1.0:
            uncertain += 1
    return StatsReport(
        triples=len(graph.triples),
        terms=graph.n_terms,
        dist_literals=n_dist,
        dist_by_family=by_family,
        uncertain_triples=uncertain,
    )
