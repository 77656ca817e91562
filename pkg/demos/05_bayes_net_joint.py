"""Tie a triple's existence to a Bayesian network node.

The fault triple below stops being independent: whether the grinder
actually has the fault is decided by the `fault` node of a two-node
network (worn bearings make faults likely). Query answers then need the
joint distribution, which the engine gets by conjoining the answer's
lineage with a CNF encoding of the network and counting weighted models.
"""

from probkg import BayesNet, BnNode, parse_graph_file, parse_query
from probkg.circuits import compile, joint_lineage_bn_cnf, wmc
from probkg.lineage import plus_of, to_boolean
from probkg.oracle import enumerate_worlds_joint
from probkg.query import PlanOptions, evaluate, plan
from probkg.store import serialize_term

GRAPH = parse_graph_file(
    """
<urn:g07812> <urn:hasFault> <urn:Overheat> @0.12 .
<urn:g07812> <urn:drives> <urn:m123> @0.85 .
"""
)

# P(worn) = 0.3; P(fault | worn) = 0.5, P(fault | fresh) = 0.05.
# The CPT rows follow itertools.product((True, False)) over the parents.
NET = BayesNet(
    (
        BnNode("worn", (), ((0.3, 0.7),)),
        BnNode("fault", ("worn",), ((0.5, 0.5), (0.05, 0.95))),
    ),
    binding={"fault": 0},  # triple id 0 is the hasFault statement
)

QUERY = parse_query(
    "SELECT ?m WHERE { <urn:g07812> <urn:hasFault> <urn:Overheat> . "
    "<urn:g07812> <urn:drives> ?m . }"
)


def main():
    # marginal of the fault node: 0.3*0.5 + 0.7*0.05 = 0.185, replacing
    # the @0.12 the triple would contribute on its own
    res = evaluate(plan(QUERY, PlanOptions(), GRAPH), GRAPH, mode="lineage")
    by_answer = {}
    for m in res.mappings:
        key = tuple((v, m.bindings.get(v)) for v in QUERY.select_vars)
        by_answer.setdefault(key, []).append(m.lineage)

    oracle = enumerate_worlds_joint(GRAPH, QUERY, NET).probabilities
    for key, lineages in by_answer.items():
        cnf, _ = joint_lineage_bn_cnf(to_boolean(plus_of(lineages)), NET, GRAPH)
        p = wmc(compile(cnf.to_formula()), cnf.weights, universe=range(1, cnf.num_vars + 1))
        label = ", ".join(f"?{v}={serialize_term(t)}" for v, t in key)
        ref = oracle[tuple(sorted((v, serialize_term(t)) for v, t in key))]
        print(f"{label}  p={p:.6f}  (drives 0.85 x fault marginal 0.185; oracle {ref:.6f})")


if __name__ == "__main__":
    main()
