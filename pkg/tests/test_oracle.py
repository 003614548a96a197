import random

import pytest
from hypothesis import given, settings, strategies as st

from compop.errors import StructuralError
from compop.functions import ArithCmp, Constraint, functions_for, identity_function, make_revise
from compop.expr import Var
from compop.lattice import Domain, Interval, enumerate_lattice, fset
from compop.oracle import (
    check_decomposition,
    domains_close,
    max_ulp_distance,
    naive_gfp,
    random_table_function,
    verify_lemma_suite,
    whole_arc_function,
)

from conftest import abc_domain, abc_functions, lattice


def test_naive_gfp_chain():
    assert naive_gfp(abc_functions(), abc_domain()).render() == "x={1} y={2} z={3}"
    assert naive_gfp([], abc_domain()) == abc_domain()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_naive_gfp_is_a_common_fixed_point(seed):
    rng = random.Random(seed)
    universes = {"a": [1, 2, 3], "b": [1, 2, 3]}
    F = [random_table_function(rng, f"f{i}", universes) for i in range(4)]
    d = Domain.from_dict({v: fset(u) for v, u in universes.items()})
    g = naive_gfp(F, d)
    assert all(f(g) == g for f in F)
    assert naive_gfp(F, g) == g


def test_domains_close_and_ulps():
    a = Domain(("x",), (Interval(0.0, 1.0),))
    b = Domain(("x",), (Interval(0.0, 1.0 + 2**-52),))
    assert not domains_close(a, b)
    assert domains_close(a, b, 1e-12)
    assert max_ulp_distance(a, b) == 1
    assert domains_close(a.bottom(), b.bottom())


LT = Constraint("lt", ArithCmp(Var("x"), "<", Var("y")))


def two_var_lattice():
    return list(enumerate_lattice({"x": [1, 2, 3, 4], "y": [1, 2, 3, 4]}))


def test_decomposition_holds_for_arc_split():
    samples = two_var_lattice()
    assert len(samples) == 256
    claim = check_decomposition(
        [whole_arc_function(LT)], [make_revise(LT, "x"), make_revise(LT, "y")], samples
    )
    assert claim and claim.scope == 256


def test_decomposition_missing_direction_refuted():
    claim = check_decomposition(
        [whole_arc_function(LT)], [make_revise(LT, "x"), identity_function("id", "y")], two_var_lattice()
    )
    assert not claim
    d = claim.witness
    assert naive_gfp([whole_arc_function(LT)], d) != naive_gfp([make_revise(LT, "x")], d)


def test_decomposition_requires_a_finer_set():
    F = functions_for([LT], {"x": "fd", "y": "fd"})
    with pytest.raises(StructuralError):
        check_decomposition(F, F, two_var_lattice())
    with pytest.raises(StructuralError):
        check_decomposition([whole_arc_function(LT)], F, [])


def test_lemma_suite_clean():
    report = verify_lemma_suite(seed=5)
    assert report.passed, "\n".join(report.lines())
    assert all("PASS" in line for line in report.lines())
    assert len(report.clauses) >= 12


def test_lemma_suite_detects_planted_faults():
    bad = verify_lemma_suite(seed=5, plant_fault="nonmonotone")
    failed = {c.name for c in bad.failures()}
    assert "functions.monotonic" in failed
    assert all(c.witness is not None for c in bad.failures())
    dep = verify_lemma_suite(seed=5, plant_fault="dependent-pair")
    assert "idempotent.independent_par" in {c.name for c in dep.failures()}


def test_lattice_helper_is_complete():
    pts = lattice(2, 2)
    assert len(pts) == len(set(pts))
