# =======================================================================
# Project:      SeqPack Solver
# File:         Formula construction and SMT-LIB emission tests
# =======================================================================

from fractions import Fraction

import pytest

from encoder import (
    And,
    ConstraintTag,
    FormulaBuilder,
    LinTerm,
    Or,
    TagOrigin,
    VarKind,
    eager_lni_count,
    emit_formula,
    emit_smtlib,
    emit_term,
    encode_pih,
    encode_poh,
    encode_temporal_pair,
    format_rational,
    non_parallel_edge_pairs,
    position_of,
    t_var,
    x_var,
    y_var,
)
from geometry import ConvexPolygon, Point2
from exceptions import DegenerateEdge, InvalidScale, ParallelEdges, UndeclaredVariable
from conftest import square_instance


def assignment(*positions):
    """{X_i, Y_i, T_i} from (x, y, t) triples"""
    values = {}
    for i, (x, y, t) in enumerate(positions):
        values[x_var(i)] = Fraction(x)
        values[y_var(i)] = Fraction(y)
        values[t_var(i)] = Fraction(t)
    return values


# ==================== Half-planes ====================

def test_poh_and_pih_split_the_plane():
    a, a_next = Point2(0, 0), Point2(1, 0)
    below, above, on_line = Point2(0, -1), Point2(0, 1), Point2(5, 0)
    assert encode_poh(None, a, a_next, None, below).evaluate({})
    assert not encode_poh(None, a, a_next, None, above).evaluate({})
    assert not encode_poh(None, a, a_next, None, on_line).evaluate({})
    assert encode_pih(None, a, a_next, None, above).evaluate({})
    assert encode_pih(None, a, a_next, None, on_line).evaluate({})
    assert not encode_pih(None, a, a_next, None, below).evaluate({})


def test_poh_follows_positions():
    formula = encode_poh(position_of(0), Point2(0, 0), Point2(1, 0), position_of(1), Point2(0, 0))
    assert formula.evaluate(assignment((0, 0, 0), (0, -1, 0)))
    assert not formula.evaluate(assignment((0, -2, 0), (0, -1, 0)))
    # horizontal edge: X coefficients vanish
    assert formula.variables() == {y_var(0), y_var(1)}


def test_halfplane_rejects_degenerate_edge():
    with pytest.raises(DegenerateEdge):
        encode_poh(None, Point2(1, 1), Point2(1, 1), None, Point2(0, 0))


# ==================== Segments ====================

def test_lni_detects_crossing_and_touching():
    builder = FormulaBuilder(square_instance([10]))
    crossing = builder.encode_lni(None, Point2(0, 0), Point2(2, 2), None, Point2(0, 2), Point2(2, 0))
    apart = builder.encode_lni(None, Point2(0, 0), Point2(1, 0), None, Point2(5, 1), Point2(5, 3))
    touching = builder.encode_lni(None, Point2(0, 0), Point2(1, 0), None, Point2(1, 0), Point2(1, 3))
    assert not crossing.evaluate({})
    assert apart.evaluate({})
    assert not touching.evaluate({})
    assert builder.params_issued == 3


def test_lni_parameters_and_expansion_agree():
    builder = FormulaBuilder(square_instance([10, 10]))
    lni = builder.encode_lni(position_of(0), Point2(0, 0), Point2(2, 0), position_of(1), Point2(1, -1), Point2(1, 1))
    values = assignment((0, 0, 0), (0, 0, 0))
    t, t_prime = lni.parameters(values)
    assert (t, t_prime) == (Fraction(1, 2), Fraction(1, 2))
    values[lni.t], values[lni.t_prime] = t, t_prime
    assert not lni.evaluate(values)

    shifted = assignment((0, 0, 0), (5, 0, 0))
    assert lni.evaluate(shifted)
    t, t_prime = lni.parameters(shifted)
    shifted[lni.t], shifted[lni.t_prime] = t, t_prime
    assert lni.expand().evaluate(shifted)


def test_lni_rejects_parallel_and_degenerate():
    builder = FormulaBuilder(square_instance([10]))
    with pytest.raises(ParallelEdges):
        builder.encode_lni(None, Point2(0, 0), Point2(1, 0), None, Point2(0, 1), Point2(3, 1))
    with pytest.raises(DegenerateEdge):
        builder.encode_lni(None, Point2(0, 0), Point2(0, 0), None, Point2(0, 1), Point2(3, 2))
    assert builder.params_issued == 0


def test_fresh_params_are_never_reused():
    builder = FormulaBuilder(square_instance([10]))
    issued = [builder.fresh_params() for _ in range(3)]
    assert len({p for pair in issued for p in pair}) == 6
    assert all(p in builder.declarations for pair in issued for p in pair)
    assert issued[0][0].kind == VarKind.TPARAM and issued[0][1].kind == VarKind.TPRIMEPARAM


# ==================== Polygons ====================

def test_pop_rules_out_containment_only():
    builder = FormulaBuilder(square_instance([10]))
    big = ConvexPolygon.rectangle(10, 10)
    small = ConvexPolygon.rectangle(2, 2, 4, 4)
    assert not builder.encode_pop(None, big, None, small).evaluate({})
    shifted = ConvexPolygon.rectangle(10, 10, 5, 5)
    assert builder.encode_pop(None, big, None, shifted).evaluate({})


def test_plni_catches_crossing_edges():
    builder = FormulaBuilder(square_instance([10]))
    a = ConvexPolygon.rectangle(10, 10)
    b = ConvexPolygon([Point2(5, -5), Point2(15, 5), Point2(5, 15)])
    plni = builder.encode_plni(None, a, None, b)
    assert len(plni.children) == len(non_parallel_edge_pairs(a, b))
    assert not plni.evaluate({})
    far = ConvexPolygon([Point2(25, -5), Point2(35, 5), Point2(25, 15)])
    assert builder.encode_plni(None, a, None, far).evaluate({})


def test_pip_is_closed_containment():
    builder = FormulaBuilder(square_instance([10]))
    plate = ConvexPolygon.rectangle(20, 20)
    assert builder.encode_pip(position_of(0), ConvexPolygon.rectangle(10, 10), None, plate).evaluate(
        assignment((10, 10, 0)))
    assert not builder.encode_pip(position_of(0), ConvexPolygon.rectangle(10, 10), None, plate).evaluate(
        assignment((11, 0, 0)))


def test_non_parallel_edge_pairs_of_squares():
    square = ConvexPolygon.rectangle(1, 1)
    pairs = non_parallel_edge_pairs(square, square)
    assert len(pairs) == 8
    assert (0, 0) not in pairs and (0, 2) not in pairs and (0, 1) in pairs


# ==================== Instance constraints ====================

def test_temporal_pair():
    formula = encode_temporal_pair(0, 1, Fraction(1))
    assert formula.evaluate({t_var(0): Fraction(0), t_var(1): Fraction(2)})
    assert formula.evaluate({t_var(0): Fraction(5), t_var(1): Fraction(3)})
    assert not formula.evaluate({t_var(0): Fraction(0), t_var(1): Fraction(1)})
    with pytest.raises(ValueError):
        encode_temporal_pair(2, 2)


def test_seq_pair_abstraction_misses_edge_crossings():
    instance = square_instance([20, 20], half_size=5)
    builder = FormulaBuilder(instance)
    lazy = builder.encode_seq_pair(0, 1, abstraction=True)
    eager = builder.encode_seq_pair(0, 1, abstraction=False)

    clear = assignment((0, 0, 0), (40, 0, 2))
    assert lazy.evaluate(clear) and eager.evaluate(clear)

    # envelope of the later square reaches into the earlier hull
    crossing = assignment((0, 0, 0), (22, 0, 2))
    assert lazy.evaluate(crossing)
    assert not eager.evaluate(crossing)

    # printed the other way round the implication is vacuous
    assert eager.evaluate(assignment((0, 0, 2), (22, 0, 0)))


def test_separating_cut_is_exact():
    instance = square_instance([20, 20], half_size=5)
    builder = FormulaBuilder(instance)
    cut = builder.encode_separating_cut(0, 1)
    assert cut.evaluate(assignment((0, 0, 0), (40, 0, 2)))
    assert not cut.evaluate(assignment((0, 0, 0), (25, 0, 2)))
    assert not cut.evaluate(assignment((0, 0, 0), (22, 0, 2)))
    assert cut.evaluate(assignment((0, 0, 0), (26, 0, 2)))


def test_plate_constraint_scales_about_center():
    instance = square_instance([20], plate=(100, 100))
    builder = FormulaBuilder(instance)
    # sigma = 1/2 leaves [25, 75] x [25, 75]
    inside = builder.encode_plate(0, Fraction(1, 2))
    assert inside.evaluate(assignment((25, 55, 0)))
    assert not inside.evaluate(assignment((24, 55, 0)))
    for sigma in (0, Fraction(3, 2)):
        with pytest.raises(InvalidScale):
            builder.encode_plate(0, sigma)


def test_build_formula_counts():
    instance = square_instance([10, 12, 14])
    lazy = FormulaBuilder(instance).build_formula(abstraction=True)
    assert lazy.count(TagOrigin.TEMPORAL) == 3
    assert lazy.count(TagOrigin.POP) == 6
    assert lazy.count(TagOrigin.PLNI_EAGER) == 0

    builder = FormulaBuilder(instance)
    eager = builder.build_formula(abstraction=False)
    assert eager.count(TagOrigin.PLNI_EAGER) == 6
    assert builder.params_issued == eager_lni_count(instance) == 48


def test_constraint_set_evaluation():
    instance = square_instance([20, 20], half_size=5)
    builder = FormulaBuilder(instance)
    constraints = builder.build_formula(abstraction=False)
    constraints.set_assumptions(builder.plate_assumptions(Fraction(1)))
    assert constraints.evaluate(assignment((0, 0, 0), (40, 0, 2)))
    assert not constraints.evaluate(assignment((0, 0, 0), (40, 0, "1/2")))
    assert not constraints.evaluate(assignment((0, 0, 0), (90, 0, 2)))


def test_tag_label():
    tag = ConstraintTag(TagOrigin.PLNI_REFINEMENT, pair=(0, 1), edges=(2, 3))
    assert tag.label() == "plni_refinement pair=0,1 edges=2,3"
    assert ConstraintTag(TagOrigin.PLATE, obj=4, sigma=Fraction(1, 2)).label() == "plate obj=4 sigma=1/2"


# ==================== SMT-LIB text ====================

@pytest.mark.parametrize("value, text", [
    (Fraction(3), "3"),
    (Fraction(0), "0"),
    (Fraction(1, 3), "(/ 1 3)"),
    (Fraction(-2), "(- 2)"),
    (Fraction(-7, 2), "(- (/ 7 2))"),
])
def test_format_rational(value, text):
    assert format_rational(value) == text


def test_emit_term_and_formula():
    term = LinTerm.build([(1, t_var(0)), (-1, t_var(1)), (0, x_var(0))], 1)
    assert emit_term(term) == "(+ T_0 (* (- 1) T_1) 1)"
    assert emit_term(LinTerm.build([(Fraction(1, 2), x_var(3))])) == "(* (/ 1 2) X_3)"
    assert emit_term(LinTerm.build([], 0)) == "0"
    assert emit_formula(And(())) == "true"
    assert emit_formula(Or(())) == "false"


def test_emit_smtlib_golden():
    script = emit_smtlib([encode_temporal_pair(0, 1, Fraction(1))], [t_var(1), t_var(0)])
    assert script == (
        "(set-option :produce-models true)\n"
        "(set-logic QF_LRA)\n"
        "(declare-const T_0 Real)\n"
        "(declare-const T_1 Real)\n"
        "(assert (or (< (+ T_0 (* (- 1) T_1) 1) 0) (< (+ (* (- 1) T_0) T_1 1) 0)))\n"
        "(check-sat)\n"
        "(get-value (T_0 T_1))\n"
    )


def test_emit_smtlib_tags_and_determinism():
    instance = square_instance([10, 10])
    builder = FormulaBuilder(instance)
    constraints = builder.build_formula(abstraction=False)
    first = emit_smtlib(constraints.base, builder.declarations)
    second_builder = FormulaBuilder(instance)
    second = emit_smtlib(second_builder.build_formula(abstraction=False).base, second_builder.declarations)
    assert first == second
    assert "; temporal pair=0,1\n" in first
    assert "; plni_eager pair=1,0\n" in first
    assert "(declare-const tp_0 Real)" in first


def test_emit_smtlib_requires_declarations():
    with pytest.raises(UndeclaredVariable):
        emit_smtlib([encode_temporal_pair(0, 1)], [t_var(0)])
