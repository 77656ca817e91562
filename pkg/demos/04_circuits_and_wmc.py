"""Compile boolean formulas to circuits and count weighted models.

The compiler produces circuits that are decomposable (AND children touch
disjoint variables) and deterministic (every OR is a decision on one
variable), which is exactly what makes weighted model counting a single
bottom-up pass.
"""

from probkg import compile, verify_circuit, wmc
from probkg.circuits import (
    CircuitCache,
    format_circuit,
    model_count,
    parse_formula,
)

f = parse_formula("(x1 & x2) | (x1 & x3) | (x2 & x3)")  # 2-of-3 majority

circuit = compile(f)
print(format_circuit(circuit))
print("verified:", verify_circuit(circuit).ok)
print("models over 3 vars:", model_count(circuit, n_vars=3))

weights = {1: (0.9, 0.1), 2: (0.5, 0.5), 3: (0.2, 0.8)}
print("P(majority up):", wmc(circuit, weights))

# independent parts split apart: note the AND at the root
g = parse_formula("(x1 | x2) & (x3 | x4)")
print("\n" + format_circuit(compile(g)))

# repeated compilations of structurally identical formulas hit the cache
cache = CircuitCache()
compile(parse_formula("x5 & (x6 | ~x7)"), circuit_cache=cache)
compile(parse_formula("x5 & (x6 | ~x7)"), circuit_cache=cache)
print(f"\ncache: {cache.hits} hit(s), {cache.misses} miss(es)")
