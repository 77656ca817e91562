"""Shared fixtures: the toy workshop graph and a seeded query corpus.

The corpus is the workhorse for the equivalence suites: 60 queries over
small random graphs with few enough uncertain triples that world
enumeration stays fast, with a healthy share of OPTIONAL/MINUS shapes.
"""

from __future__ import annotations

import random

import pytest

from probkg.query import parse_query
from probkg.store import parse_graph_file

GRINDER_TEXT = """\
# a machine with an uncertain fault and a measured temperature
<urn:m123> <urn:hasTemp> "gmm(1.0:N(80,1))"^^<urn:prob:dist> .
<urn:g07812> <urn:hasFault> <urn:Overheat> @0.12 .
<urn:g07812> <urn:type> <urn:AngleGrinder> .
<urn:m123> <urn:type> <urn:Motor> .
"""


@pytest.fixture(scope="session")
def grinder():
    return parse_graph_file(GRINDER_TEXT)


def random_graph_text(seed: int, n_uncertain: int = 6, n_relation: int = 14) -> str:
    """A small relation graph plus two distribution-valued attributes."""
    rng = random.Random(seed)
    ents = [f"<urn:e{i}>" for i in range(6)]
    preds = ["<urn:p0>", "<urn:p1>", "<urn:p2>"]
    seen = set()
    rows = []
    while len(rows) < n_relation:
        s, o = rng.choice(ents), rng.choice(ents)
        p = rng.choice(preds)
        if (s, p, o) in seen:
            continue
        seen.add((s, p, o))
        rows.append(f"{s} {p} {o}")
    marks = rng.sample(range(n_relation), min(n_uncertain, n_relation))
    lines = []
    for i, row in enumerate(rows):
        if i in marks:
            lines.append(f"{row} @{rng.choice(('0.12', '0.3', '0.5', '0.7', '0.9'))} .")
        else:
            lines.append(f"{row} .")
    mu = rng.randint(60, 90)
    lines.append(f'<urn:e0> <urn:val> "gmm(1.0:N({mu},4))"^^<urn:prob:dist> .')
    lines.append('<urn:e1> <urn:val> "gmm(0.5:N(20,1);0.5:N(40,1))"^^<urn:prob:dist> .')
    return "\n".join(lines) + "\n"


def corpus_queries(rng: random.Random) -> list[str]:
    """Deterministic template instantiation; heavy on join/option/minus mix."""
    preds = ["<urn:p0>", "<urn:p1>", "<urn:p2>"]
    p = lambda: rng.choice(preds)  # noqa: E731
    ent = lambda: f"<urn:e{rng.randrange(6)}>"  # noqa: E731
    queries: list[str] = []
    for _ in range(12):  # plain joins: single, chain, star
        shape = rng.randrange(3)
        if shape == 0:
            queries.append(f"SELECT ?x WHERE {{ ?x {p()} ?y . }}")
        elif shape == 1:
            queries.append(
                f"SELECT ?x ?z WHERE {{ ?x {p()} ?y . ?y {p()} ?z . }}"
            )
        else:
            queries.append(
                f"SELECT ?x ?y ?z WHERE {{ ?x {p()} ?y . ?x {p()} ?z . }}"
            )
    for _ in range(8):  # ground-anchored lookups
        queries.append(f"SELECT ?x WHERE {{ {ent()} {p()} ?x . }}")
        queries.append(f"SELECT ?x WHERE {{ ?x {p()} {ent()} . }}")
    for _ in range(8):  # unions
        queries.append(
            f"SELECT ?x WHERE {{ {{ ?x {p()} ?y . }} UNION {{ ?x {p()} ?y . }} }}"
        )
    for _ in range(6):  # optionals
        queries.append(
            f"SELECT ?x ?z WHERE {{ ?x {p()} ?y . OPTIONAL {{ ?y {p()} ?z . }} }}"
        )
    for _ in range(6):  # minus
        queries.append(
            f"SELECT ?x WHERE {{ ?x {p()} ?y . MINUS {{ ?x {p()} {ent()} . }} }}"
        )
    for _ in range(4):  # optional + minus stacked
        queries.append(
            f"SELECT ?x WHERE {{ ?x {p()} ?y . OPTIONAL {{ ?y {p()} ?z . }} "
            f"MINUS {{ ?x {p()} ?w . ?w {p()} ?x . }} }}"
        )
    for _ in range(4):  # filters over terms
        queries.append(
            f"SELECT ?x ?y WHERE {{ ?x {p()} ?y . FILTER ( ?y != {ent()} ) }}"
        )
    for _ in range(2):  # arithmetic over attribute distributions
        queries.append(
            "SELECT ?s ?m WHERE { ?s <urn:val> ?d . BIND ( MEAN ( ?d ) AS ?m ) "
            "FILTER ( ?m > 25 ) }"
        )
    return queries


def build_corpus(seed: int = 20240816):
    """(graph, ast, query text) triples shared by the equivalence suites."""
    rng = random.Random(seed)
    graphs = [parse_graph_file(random_graph_text(seed + k)) for k in range(5)]
    out = []
    for i, q in enumerate(corpus_queries(rng)):
        g = graphs[i % len(graphs)]
        out.append((g, parse_query(q), q))
    return out


@pytest.fixture(scope="session")
def corpus():
    return build_corpus()
