import itertools
import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

from compop.expr import Var
from compop.functions import ArithCmp, Constraint, make_revise
from compop.lattice import Domain, FiniteSet, Interval, enumerate_lattice, fset

CORPUS = Path(__file__).resolve().parents[1] / "src" / "compop" / "corpus"


def finite_sets(universe=(1, 2, 3, 4)):
    return st.frozensets(st.sampled_from(universe)).map(fset)


def fd_domains(names=("x", "y"), universe=(1, 2, 3, 4)):
    return st.tuples(*(finite_sets(universe) for _ in names)).map(lambda doms: Domain(tuple(names), doms))


@st.composite
def intervals(draw, lo=-50.0, hi=50.0):
    a = draw(st.floats(lo, hi, allow_nan=False))
    b = draw(st.floats(lo, hi, allow_nan=False))
    return Interval(min(a, b), max(a, b))


@st.composite
def sub_interval(draw, outer: Interval):
    a = draw(st.floats(outer.lo, outer.hi))
    b = draw(st.floats(outer.lo, outer.hi))
    return Interval(min(a, b), max(a, b))


def lattice(n_vars=2, universe=3):
    names = "xyzw"[:n_vars]
    return list(dict.fromkeys(enumerate_lattice({v: range(1, universe + 1) for v in names})))


def ordered_pairs(elements):
    from compop.lattice import leq

    return [(a, b) for a, b in itertools.product(elements, elements) if leq(a, b)]


def abc_functions():
    c1 = Constraint("c1", ArithCmp(Var("x"), "<", Var("y")))
    c2 = Constraint("c2", ArithCmp(Var("y"), "<", Var("z")))
    return [make_revise(c1, "x"), make_revise(c1, "y"), make_revise(c2, "y"), make_revise(c2, "z")]


def abc_domain():
    s = FiniteSet(frozenset({1, 2, 3}))
    return Domain(("x", "y", "z"), (s, s, s))


@pytest.fixture
def abc():
    return abc_functions(), abc_domain()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
