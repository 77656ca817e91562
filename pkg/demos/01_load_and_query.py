"""Load the workshop graph and run a few plain queries.

Plain mode ignores the probabilistic annotations entirely — it answers as
if every triple were certain, which is the right baseline to understand
before turning uncertainty on (demo 02).
"""

from pathlib import Path

from probkg import graph_stats, parse_graph_file, parse_query, plan, evaluate, PlanOptions
from probkg.store import serialize_term

DATA = Path(__file__).parent / "data" / "workshop.pkg"


def show(graph, text):
    print(f"\n>>> {text.strip()}")
    ast = parse_query(text)
    result = evaluate(plan(ast, PlanOptions(), graph), graph, mode="plain")
    for m in result.mappings:
        row = "  ".join(
            f"?{v}={serialize_term(t)}" for v, t in sorted(m.bindings.items())
        )
        print(f"  {row or '(empty row)'}")
    if not result.mappings:
        print("  (no answers)")


def main():
    graph = parse_graph_file(DATA.read_text())
    for key, value in graph_stats(graph).to_dict().items():
        print(f"{key}: {value}")

    show(graph, "SELECT ?m WHERE { ?m <urn:type> <urn:Motor> . }")

    # join: sensors and what they watch, restricted to bay2
    show(
        graph,
        """SELECT ?s ?m WHERE {
             ?s <urn:observes> ?m .
             ?m <urn:locatedIn> <urn:bay2> .
           }""",
    )

    # OPTIONAL keeps motors that lack a sensor, with ?s left unbound
    show(
        graph,
        """SELECT ?m ?s WHERE {
             ?m <urn:type> <urn:Motor> .
             OPTIONAL { ?s <urn:observes> ?m . }
           }""",
    )

    # numeric filter over a distribution moment
    show(
        graph,
        """SELECT ?m WHERE {
             ?m <urn:hasTemp> ?t .
             FILTER ( MEAN ( ?t ) > 75 )
           }""",
    )


if __name__ == "__main__":
    main()
