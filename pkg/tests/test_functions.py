import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compop.errors import KindError, ParameterError
from compop.expr import Var, evaluate, parse_expr
from compop.functions import (
    ArithCmp,
    Constraint,
    ExtensionalBinary,
    Kind,
    LinearSystem,
    apply,
    box_narrow,
    constant_function,
    functions_for,
    gauss_seidel_sweep,
    hc4_revise,
    identity_function,
    make_box,
    make_gauss_seidel,
    make_hc4,
    make_revise,
    reads,
    revise,
    writes,
)
from compop.lattice import EMPTY, Domain, Interval, fset, leq
from compop.oracle import max_ulp_distance

from conftest import intervals, lattice, ordered_pairs


def box(**doms):
    return Domain.from_dict({k: Interval(*v) for k, v in doms.items()})


def cmp(text):
    lhs, rel, rhs = text.partition(" = ") if " = " in text else text.partition(" <= ")
    return ArithCmp(parse_expr(lhs), rel.strip(), parse_expr(rhs))


def supports(rel, target, d):
    # every value of target that some pair satisfying rel uses
    x, y = d.vars
    return fset(
        {a if target == x else b for a, b in itertools.product(d[x], d[y]) if rel(a, b)}
    )


LT = ArithCmp(Var("x"), "<", Var("y"))


def test_revise_examples():
    d = Domain(("x", "y"), (fset({1, 2, 3}), fset({1, 2, 3})))
    assert revise(LT, "x", d)["x"] == supports(lambda a, b: a < b, "x", d) == fset({1, 2})
    assert revise(LT, "y", d)["y"] == supports(lambda a, b: a < b, "y", d) == fset({2, 3})
    tight = Domain(("x", "y"), (fset({1}), fset({2, 3})))
    assert revise(LT, "x", tight) == tight
    assert revise(LT, "x", tight.bottom()).empty


def test_revise_table_and_kind():
    c = ExtensionalBinary("x", "y", frozenset({(1, 2), (3, 1)}))
    d = Domain(("x", "y"), (fset({1, 2, 3}), fset({2})))
    assert revise(c, "x", d)["x"] == fset({1})
    with pytest.raises(KindError):
        revise(LT, "x", box(x=(0, 1), y=(0, 1)))


def test_revise_is_contracting_monotonic_idempotent():
    elements = lattice(2, 3)
    fs = [make_revise(Constraint("c", LT), v) for v in "xy"]
    table = ExtensionalBinary("x", "y", frozenset({(1, 3), (2, 2), (3, 1), (3, 3)}))
    fs += [make_revise(Constraint("t", table), v) for v in "xy"]
    for f in fs:
        for d in elements:
            fd = apply(f, d)
            assert leq(fd, d)
            assert apply(f, fd) == fd
        for a, b in ordered_pairs(elements):
            assert leq(apply(f, a), apply(f, b))


def test_apply_trivia():
    d = Domain(("x",), (fset({1, 2}),))
    assert apply(identity_function("id", "x"), d) == d
    assert apply(constant_function("k", "x", fset({2, 5})), d)["x"] == fset({2})
    assert apply(make_revise(Constraint("c", LT), "x"), Domain(("x", "y"), (fset({1}), EMPTY))).empty


def test_hc4_sum():
    # x = 5 - y with y in [0, 2] gives [3, 5]
    d = box(x=(0, 10), y=(0, 2))
    out = hc4_revise(cmp("x + y = 5"), d)
    assert out == box(x=(3, 5), y=(0, 2))
    assert hc4_revise(cmp("x + y = 5"), out) == out


def test_hc4_infeasible_and_square():
    assert hc4_revise(cmp("x^2 = -1"), box(x=(0, 1))).empty
    assert hc4_revise(cmp("x^2 = 4"), box(x=(-10, 10))) == box(x=(-2, 2))
    assert hc4_revise(cmp("x <= 0.5 * y"), box(x=(0, 10), y=(0, 4))) == box(x=(0, 2), y=(0, 4))


def test_box_square():
    out = box_narrow(cmp("x^2 = 4"), "x", box(x=(0, 10)), 1e-9)["x"]
    assert out.lo <= 2.0 <= out.hi
    assert out.width <= 2e-9


def test_box_errors_and_edges():
    c = cmp("x * x = 4")
    with pytest.raises(ParameterError):
        box_narrow(c, "x", box(x=(0, 10)), 0.0)
    assert box_narrow(cmp("x * x = -4"), "x", box(x=(0, 1)), 1e-9).empty
    coarse = box_narrow(c, "x", box(x=(0, 10)), 100.0)
    assert leq(coarse, box(x=(0, 10)))


def test_box_multiple_occurrence_beats_hc4():
    d = box(x=(0.5, 10))
    c = cmp("x * x = 4")
    h = hc4_revise(c, d)["x"]
    b = box_narrow(c, "x", d, 1e-9)["x"]
    assert b.width < 1e-8 < h.width


def test_gauss_seidel_examples():
    one = LinearSystem(("x",), (((1.0, 1.0),),), ((2.0, 2.0),))
    assert gauss_seidel_sweep(one, box(x=(0, 10))) == box(x=(2, 2))
    two = LinearSystem(("x", "y"), (((2.0, 2.0), (0.0, 0.0)), ((0.0, 0.0), (1.0, 1.0))), ((4.0, 4.0), (0.0, 5.0)))
    assert gauss_seidel_sweep(two, box(x=(0, 10), y=(0, 10)))["x"] == Interval(2, 2)
    s = LinearSystem(("x", "y"), (((1.0, 1.0), (-0.5, -0.5)), ((-0.5, -0.5), (1.0, 1.0))), ((0.0, 0.0), (0.0, 0.0)))
    # x := 0.5 * [-1, 1]; then y := 0.5 * x
    assert gauss_seidel_sweep(s, box(x=(-1, 1), y=(-1, 1))) == box(x=(-0.5, 0.5), y=(-0.25, 0.25))


def test_gauss_seidel_rejects_zero_diagonal():
    with pytest.raises(ParameterError):
        LinearSystem(("x",), (((-1.0, 1.0),),), ((1.0, 1.0),))


def test_reads_writes():
    c = Constraint("c", LT)
    f = make_revise(c, "y")
    assert reads(f) == {"x", "y"} and writes(f) == {"y"}
    g = make_hc4(Constraint("s", cmp("x + y * z = 1")))
    assert writes(g) == {"x", "y", "z"}
    s = LinearSystem(("x", "y"), (((1.0, 1.0), (0.0, 0.0)), ((0.0, 0.0), (1.0, 1.0))), ((0.0, 0.0), (0.0, 0.0)))
    h = make_gauss_seidel(Constraint("s", s))
    assert reads(h) == writes(h) == {"x", "y"}


def test_functions_for_counts():
    kinds = {"x": "interval", "y": "interval"}
    fs = functions_for([Constraint("c", cmp("x + y = 5"))], kinds)
    assert [f.kind for f in fs] == [Kind.HC4_REVISE]
    fs = functions_for([Constraint("c", cmp("x*x + y = 2"))], kinds)
    assert [(f.kind, f.target) for f in fs] == [(Kind.HC4_REVISE, None), (Kind.BOX_NARROW, "x")]
    fs = functions_for([Constraint("c", cmp("x + y = 5"))], kinds, prune_single_occurrence=False)
    assert len(fs) == 3
    fs = functions_for([Constraint("c", LT, priority=4)], {"x": "fd", "y": "fd"})
    assert [f.priority for f in fs] == [4, 4]


# interval functions on sampled boxes

FORMS = [cmp(t) for t in ("x + y = 3", "x * y + x = 2", "x^2 - y <= 1", "x * x + y * y = 8", "2 * x - y * x = 0")]


@st.composite
def nested_boxes(draw):
    a = draw(intervals(-8, 8))
    b = draw(intervals(-8, 8))
    inner_a = Interval(*sorted((draw(st.floats(a.lo, a.hi)), draw(st.floats(a.lo, a.hi)))))
    inner_b = Interval(*sorted((draw(st.floats(b.lo, b.hi)), draw(st.floats(b.lo, b.hi)))))
    return Domain(("x", "y"), (inner_a, inner_b)), Domain(("x", "y"), (a, b))


def interval_functions(form):
    c = Constraint("c", form)
    return [make_hc4(c), make_box(c, "x", 1e-6), make_box(c, "y", 1e-6)]


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(range(len(FORMS))), nested_boxes())
def test_interval_functions_contracting_monotonic(k, boxes):
    small, big = boxes
    for f in interval_functions(FORMS[k]):
        fb = apply(f, big)
        assert leq(fb, big)
        assert leq(apply(f, small), fb)


@settings(max_examples=150, deadline=None)
@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(0, 3), st.integers(0, 3))
def test_interval_functions_keep_solutions(px, py, wx, wy):
    env = {"x": px, "y": py}
    d = box(x=(px - wx, px + 0.5 * wy), y=(py - 0.25 * wx, py + wy))
    for form in FORMS:
        # shift the constraint so that the integer point satisfies it exactly
        exact = ArithCmp(form.lhs, "=", parse_expr(str(evaluate(form.lhs, env))))
        for f in interval_functions(exact):
            out = apply(f, d)
            assert not out.empty
            assert out["x"].lo <= px <= out["x"].hi and out["y"].lo <= py <= out["y"].hi


@settings(max_examples=100, deadline=None)
@given(st.integers(-5, 5), st.sampled_from([1.0, -1.0, 2.0, -0.5, 3.0]), intervals(-10, 10), intervals(-10, 10))
def test_box_agrees_with_hc4_for_single_occurrence(k, a, bx, by):
    form = ArithCmp(parse_expr(f"{a} * x + y"), "=", parse_expr(str(k)))
    d = Domain(("x", "y"), (bx, by))
    h = hc4_revise(form, d)
    for v in "xy":
        # the smallest eps makes the shaving grid the float grid itself
        b = box_narrow(form, v, d, 5e-324)
        assert h.empty == b.empty
        if not h.empty:
            assert max_ulp_distance(Domain((v,), (b[v],)), Domain((v,), (h[v],))) <= 4
