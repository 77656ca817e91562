import itertools

import numpy as np
import pytest

from probkg.lineage import (
    FALSE,
    ONE,
    TRUE,
    ZERO,
    And,
    Monus,
    Or,
    Plus,
    Times,
    Var,
    and_of,
    condition,
    eval_formula,
    fmt_lineage,
    formula_vars,
    has_monus,
    lineage_vars,
    lit,
    monus_of,
    negate,
    negative_vars,
    or_of,
    plus_of,
    times_of,
    to_boolean,
)

x1, x2, x3, x4 = Var(1), Var(2), Var(3), Var(4)


class TestLineageConstructors:
    def test_plus_drops_zeros_and_unwraps(self):
        assert plus_of([ZERO, x1, ZERO]) == x1
        assert plus_of([]) == ZERO
        assert plus_of([ZERO]) == ZERO

    def test_plus_flattens(self):
        nested = plus_of([x1, plus_of([x2, x3])])
        assert isinstance(nested, Plus)
        assert nested.children == (x1, x2, x3)

    def test_times_annihilates_on_zero(self):
        assert times_of([x1, ZERO, x2]) == ZERO
        assert times_of([]) == ONE
        assert times_of([ONE, x1]) == x1

    def test_times_flattens(self):
        nested = times_of([x1, times_of([x2, x3])])
        assert isinstance(nested, Times)
        assert nested.children == (x1, x2, x3)

    def test_monus_simplifications(self):
        assert monus_of(x1, ZERO) == x1
        assert monus_of(ZERO, x1) == ZERO
        assert isinstance(monus_of(x1, x2), Monus)

    def test_vars_and_monus_detection(self):
        e = monus_of(times_of([x1, x2]), plus_of([x3, x4]))
        assert lineage_vars(e) == frozenset((1, 2, 3, 4))
        assert has_monus(e)
        assert not has_monus(times_of([x1, x2]))

    def test_fmt_is_stable(self):
        e = plus_of([times_of([x1, x2]), monus_of(x3, x4)])
        assert fmt_lineage(e) == "((x1 * x2) + (x3 - x4))"


class TestFormulaCanonicalization:
    def test_literals_are_interned(self):
        assert lit(5) is lit(5)
        assert lit(5, False) is lit(5, False)
        assert lit(5) is not lit(5, False)

    def test_and_basic_folding(self):
        assert and_of([]) is TRUE
        assert and_of([TRUE, lit(1)]) == lit(1)
        assert and_of([FALSE, lit(1)]) is FALSE
        assert and_of([lit(1), lit(1)]) == lit(1)

    def test_and_complementary_units_collapse(self):
        assert and_of([lit(1), lit(1, False)]) is FALSE

    def test_and_orders_children_canonically(self):
        a = and_of([lit(2), lit(1)])
        b = and_of([lit(1), lit(2)])
        assert a == b
        assert a.skey == b.skey

    def test_and_unit_propagation_reaches_nested_or(self):
        # x1 & (x2 | ~x1): the unit forces the or down to x2
        f = and_of([lit(1), or_of([lit(2), lit(1, False)])])
        assert f == and_of([lit(1), lit(2)])

    def test_unit_propagation_rebuild_terminates(self):
        # conditioning may rebuild a semantically identical child with a new
        # identity; canonical equality (not identity) must stop the recursion
        f = and_of([lit(1), or_of([lit(2), and_of([lit(3), lit(4)])])])
        assert isinstance(f, And)
        g = and_of([lit(1), or_of([lit(2), and_of([lit(3), lit(4)])])])
        assert f == g

    def test_or_basic_folding(self):
        assert or_of([]) is FALSE
        assert or_of([FALSE, lit(1)]) == lit(1)
        assert or_of([TRUE, lit(1)]) is TRUE
        assert or_of([lit(1), lit(1)]) == lit(1)

    def test_or_with_complementary_literals_is_true(self):
        assert or_of([lit(1), lit(1, False)]) is TRUE

    def test_or_flattens_and_sorts(self):
        f = or_of([lit(3), or_of([lit(1), lit(2)])])
        g = or_of([lit(1), lit(2), lit(3)])
        assert f == g

    def test_equality_is_structural(self):
        f = and_of([lit(1), or_of([lit(2), lit(3)])])
        g = and_of([or_of([lit(3), lit(2)]), lit(1)])
        assert f == g
        assert hash(f) == hash(g)


class TestConditionNegate:
    def test_condition_substitutes(self):
        f = and_of([lit(1), or_of([lit(2), lit(3)])])
        assert condition(f, {1: True, 2: False}) == lit(3)
        assert condition(f, {1: False}) is FALSE
        assert condition(f, {1: True, 2: True}) is TRUE

    def test_negate_is_involutive(self):
        f = and_of([lit(1), or_of([lit(2, False), lit(3)])])
        assert negate(negate(f)) == f

    def test_negate_de_morgan(self):
        f = negate(and_of([lit(1), lit(2)]))
        assert f == or_of([lit(1, False), lit(2, False)])

    def test_negative_vars_tracks_polarity(self):
        f = and_of([lit(1), or_of([lit(2, False), lit(3)])])
        assert formula_vars(f) == frozenset((1, 2, 3))
        assert negative_vars(f) == frozenset((2,))


class TestToBoolean:
    def test_atoms(self):
        assert to_boolean(ZERO) is FALSE
        assert to_boolean(ONE) is TRUE
        assert to_boolean(x1) == lit(1)

    def test_connectives(self):
        assert to_boolean(plus_of([x1, x2])) == or_of([lit(1), lit(2)])
        assert to_boolean(times_of([x1, x2])) == and_of([lit(1), lit(2)])

    def test_monus_becomes_guarded_negation(self):
        f = to_boolean(monus_of(x1, x2))
        assert f == and_of([lit(1), lit(2, False)])

    def test_semantics_match_on_all_assignments(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            expr = _random_lineage(rng, depth=3)
            f = to_boolean(expr)
            vs = sorted(lineage_vars(expr))
            for values in itertools.product((False, True), repeat=len(vs)):
                asg = dict(zip(vs, values))
                assert eval_formula(f, asg) == _eval_lineage(expr, asg)


def _eval_lineage(expr, asg) -> bool:
    """Reference lineage semantics: does the answer survive in this world?"""
    if isinstance(expr, Var):
        return asg[expr.tid]
    if expr == ZERO:
        return False
    if expr == ONE:
        return True
    if isinstance(expr, Plus):
        return any(_eval_lineage(c, asg) for c in expr.children)
    if isinstance(expr, Times):
        return all(_eval_lineage(c, asg) for c in expr.children)
    if isinstance(expr, Monus):
        return _eval_lineage(expr.left, asg) and not _eval_lineage(expr.right, asg)
    raise TypeError(expr)


def _random_lineage(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        return Var(int(rng.integers(1, 6)))
    kind = rng.integers(0, 3)
    if kind == 0:
        return plus_of([_random_lineage(rng, depth - 1) for _ in range(2)])
    if kind == 1:
        return times_of([_random_lineage(rng, depth - 1) for _ in range(2)])
    return monus_of(_random_lineage(rng, depth - 1), _random_lineage(rng, depth - 1))


class TestEvalFormula:
    def test_total_assignment_required(self):
        with pytest.raises(KeyError):
            eval_formula(lit(9), {})

    def test_connective_semantics(self):
        f = or_of([and_of([lit(1), lit(2)]), lit(3, False)])
        assert eval_formula(f, {1: True, 2: True, 3: True})
        assert eval_formula(f, {1: False, 2: True, 3: False})
        assert not eval_formula(f, {1: False, 2: True, 3: True})
