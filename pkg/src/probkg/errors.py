"""Exception taxonomy shared across the package.

Grouped by the CLI's exit-code mapping: usage errors are handled by argparse,
data/model errors (everything below except :class:`Timeout`) map to exit code
2, and :class:`Timeout` maps to exit code 3.
"""

from __future__ import annotations


class ProbKgError(Exception):
    """Base class for all errors raised by this package."""


# --- distribution algebra ---------------------------------------------------

class BadDistribution(ProbKgError):
    """Malformed distribution: bad lexical form or violated invariant."""


class DimensionMismatch(ProbKgError):
    """Operands have different dimensions, or an op requires 1-d input."""


class FamilyMismatch(ProbKgError):
    """Cross-family operation (e.g. fusing a mixture with a histogram)."""


class UnsupportedFamily(ProbKgError):
    """The operation is not defined for this distribution family."""


class UnsupportedMethod(ProbKgError):
    """No such evaluation method for these operands (e.g. closed-form
    divergence of two mixtures)."""


class EdgesMismatch(ProbKgError):
    """Closed-form histogram divergence requires identical bin edges."""


class BadInterval(ProbKgError):
    """Interval bounds are not ordered lo < hi."""


class BadGrid(ProbKgError):
    """Coarsening grid is too short or not strictly increasing."""


class ZeroScale(ProbKgError):
    """Affine map with scale a = 0 would collapse the distribution."""


class NumericalUnderflow(ProbKgError):
    """All terms of a normalization underflowed to zero."""


# --- graph store ------------------------------------------------------------

class LineParse(ProbKgError):
    """Malformed graph line; carries the 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class BadProbability(LineParse):
    """Existence probability outside (0, 1]."""

    def __init__(self, line_no: int, value: float):
        super().__init__(line_no, f"existence probability {value!r} outside (0,1]")
        self.value = value


class DuplicateTriple(LineParse):
    """Duplicate (s, p, o) statement; the store never merges evidence."""

    def __init__(self, line_no: int):
        super().__init__(line_no, "duplicate (s,p,o) statement")


# --- query dialect ----------------------------------------------------------

class QuerySyntax(ProbKgError):
    """Query text does not match the dialect grammar."""

    def __init__(self, line: int, col: int, expected: str):
        super().__init__(f"{line}:{col}: expected {expected}")
        self.line = line
        self.col = col
        self.expected = expected


class UnboundVariable(ProbKgError):
    """An expression references a variable no enclosing pattern binds."""

    def __init__(self, name: str):
        super().__init__(f"variable ?{name} is not bound by any enclosing pattern")
        self.name = name


class EvalTypeError(ProbKgError):
    """A builtin received a value of the wrong type during evaluation.

    The evaluator catches this per mapping (condition becomes false / the
    mapping is dropped) and counts it as a warning; it only escapes for
    errors outside per-mapping expression evaluation.
    """


# --- compilation ------------------------------------------------------------

class VarLimitExceeded(ProbKgError):
    """Formula has more variables than the compiler accepts."""


class Timeout(ProbKgError):
    """Compilation exceeded its time budget (CLI exit code 3)."""

    def __init__(self, budget_s: float):
        super().__init__(f"compilation exceeded the {budget_s:g}s budget")
        self.budget_s = budget_s


class MissingWeight(ProbKgError):
    """Weighted model counting found an unweighted variable."""

    def __init__(self, var: int):
        super().__init__(f"no weight for variable x{var}")
        self.var = var


class CyclicNetwork(ProbKgError):
    """Bayesian network graph contains a directed cycle."""


class MalformedCpt(ProbKgError):
    """CPT is missing rows or holds values outside [0,1]."""


class IncompleteAssignment(ProbKgError):
    """Joint-probability lookup requires every node to be assigned."""


# --- oracle -----------------------------------------------------------------

class TooManyWorlds(ProbKgError):
    """More uncertain triples than brute-force enumeration allows."""

    def __init__(self, n_uncertain: int, limit: int):
        super().__init__(
            f"{n_uncertain} uncertain triples exceed the enumeration limit {limit}"
        )
        self.n_uncertain = n_uncertain
        self.limit = limit


# --- concept boxes ----------------------------------------------------------

class UnknownConcept(ProbKgError):
    """Concept name missing from the space."""


class UnknownIndividual(ProbKgError):
    """Individual has no concept assertions."""


class DegenerateConditioningBox(ProbKgError):
    """Hard-mode conditioning on a zero-volume box."""


class EmptyAxioms(ProbKgError):
    """Fitting requires at least one axiom."""


class BadAxiom(ProbKgError):
    """Malformed axiom line; carries the 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


# --- bench ------------------------------------------------------------------

class BenchConfigError(ProbKgError):
    """Suite or generator configuration violates its invariants."""


class VariantMismatch(ProbKgError):
    """Query variants disagreed on results; timing claims are void."""
