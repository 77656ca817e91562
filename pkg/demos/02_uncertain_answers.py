"""Answer probabilities: the lifted/compiled split, checked against brute force.

`query_probabilities` picks its route per query: hierarchical self-join-free
patterns get the polynomial-time lifted evaluation, everything else goes
through lineage tracking and circuit compilation. Both routes are exact, so
on graphs small enough to enumerate we can confirm them against the oracle.
"""

from probkg import parse_graph_file, parse_query, query_probabilities, enumerate_worlds
from probkg.store import serialize_term

GRAPH = parse_graph_file(
    """
<urn:g07812> <urn:hasFault> <urn:Overheat> @0.12 .
<urn:g07812> <urn:drives> <urn:m123> @0.85 .
<urn:g07812> <urn:drives> <urn:m124> @0.40 .
<urn:m123> <urn:feeds> <urn:line1> @0.90 .
<urn:m124> <urn:feeds> <urn:line1> @0.70 .
"""
)


def show(text):
    ast = parse_query(text)
    answers, route = query_probabilities(GRAPH, ast)
    oracle = enumerate_worlds(GRAPH, ast).probabilities
    print(f"\n>>> {text.strip()}   [route: {route}]")
    for key, p in sorted(answers.items(), key=lambda kv: -kv[1]):
        label = ", ".join(
            f"?{v}={serialize_term(t)}" for v, t in key if t is not None
        )
        ref = oracle[tuple(sorted((v, serialize_term(t)) for v, t in key if t is not None))]
        print(f"  {label or '(yes)'}  p={p:.6f}  (oracle {ref:.6f})")


def main():
    # single pattern: trivially safe, evaluated lifted
    show("SELECT ?m WHERE { <urn:g07812> <urn:drives> ?m . }")

    # which lines might the grinder end up feeding? The two derivations for
    # line1 share no triple, so the lifted 1-(1-p1)(1-p2) rule applies.
    show(
        """SELECT ?l WHERE {
             <urn:g07812> <urn:drives> ?m .
             ?m <urn:feeds> ?l .
           }"""
    )

    # MINUS forces the compiled route: answers need full lineage
    show(
        """SELECT ?m WHERE {
             <urn:g07812> <urn:drives> ?m .
             MINUS { ?m <urn:feeds> ?l . }
           }"""
    )


if __name__ == "__main__":
    main()
