"""probkg: a probabilistic knowledge-graph engine.

Uncertainty lives at three levels: attribute values carry full
distributions, triples carry existence probabilities, and concepts carry
box embeddings.  Submodules are importable directly; the names below cover
the common entry points.
"""

from .distributions import (
    Dirichlet,
    Gaussian,
    Gmm,
    Histogram,
    convolve,
    fuse,
    jsd,
    jsd_lower_bound,
    moments,
    parse_distribution,
    format_distribution,
)
from .errors import ProbKgError
from .store import (
    DistLiteral,
    Graph,
    Iri,
    Literal,
    ProbTriple,
    Variable,
    graph_stats,
    parse_graph_file,
    serialize_graph,
)
from .query import PlanOptions, evaluate, parse_query, plan
from .circuits import (
    BayesNet,
    BnNode,
    answer_probability,
    bn_to_cnf,
    compile,
    lifted_eval,
    query_probabilities,
    safe_plan,
    verify_circuit,
    wmc,
)
from .oracle import bn_joint, enumerate_worlds, quad_jsd
from .boxes import ConceptSpace, StatAxiom, cond_prob, fit, instance_prob
from .sampling import SamplerConfig, mc_jsd, mc_threshold

__version__ = "0.1.0"

__all__ = [
    "Dirichlet",
    "Gaussian",
    "Gmm",
    "Histogram",
    "convolve",
    "fuse",
    "jsd",
    "jsd_lower_bound",
    "moments",
    "parse_distribution",
    "format_distribution",
    "ProbKgError",
    "DistLiteral",
    "Graph",
    "Iri",
    "Literal",
    "ProbTriple",
    "Variable",
    "graph_stats",
    "parse_graph_file",
    "serialize_graph",
    "PlanOptions",
    "evaluate",
    "parse_query",
    "plan",
    "BayesNet",
    "BnNode",
    "answer_probability",
    "bn_to_cnf",
    "compile",
    "lifted_eval",
    "query_probabilities",
    "safe_plan",
    "verify_circuit",
    "wmc",
    "bn_joint",
    "enumerate_worlds",
    "quad_jsd",
    "ConceptSpace",
    "StatAxiom",
    "cond_prob",
    "fit",
    "instance_prob",
    "SamplerConfig",
    "mc_jsd",
    "mc_threshold",
    "__version__",
]
