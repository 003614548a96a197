import itertools
import random

import pytest

from compop.engine import Context, RandomChoice, UpdatePolicy, gi, gico, registry_of, update
from compop.errors import ContractViolation, StructuralError
from compop.functions import functions_for, table_function
from compop.instance import parse_instance
from compop.lattice import Domain, fset, leq
from compop.operators import Atomic, FactBase, Gfp, Seq, Stats, evaluate
from compop.oracle import naive_gfp, random_fd_instance
from compop.strategies import Fifo, PriorityClosure

from conftest import CORPUS, abc_domain, abc_functions


def brute_force_supports(cons, d):
    # projection of the solution set; equals arc consistency on a chain of binary constraints
    sols = [
        dict(zip(d.vars, p))
        for p in itertools.product(*(d[v].sorted() for v in d.vars))
        if all(c(dict(zip(d.vars, p))) for c in cons)
    ]
    return Domain(d.vars, tuple(fset({s[v] for s in sols}) for v in d.vars))


def test_gi_trivia():
    d = abc_domain()
    assert gi([], d).domain == d
    assert gi(abc_functions(), d.bottom()).domain.empty


def test_gi_ac3_chain():
    d = abc_domain()
    expected = brute_force_supports([lambda s: s["x"] < s["y"], lambda s: s["y"] < s["z"]], d)
    assert gi(abc_functions(), d).domain == expected
    assert expected.render() == "x={1} y={2} z={3}"


def fd_random(seed):
    rng = random.Random(seed)
    cons, d = random_fd_instance(rng)
    return functions_for(cons, {v: "fd" for v in d.vars}), d


def test_gico_fifo_is_gi():
    for seed in range(30):
        F, d = fd_random(seed)
        a = gi(F, d)
        b = gico(F, d, Fifo())
        assert a.domain == b.domain
        assert a.stats.atomic_applications == b.stats.atomic_applications


def test_priority_closure_matches_gi():
    inst = parse_instance((CORPUS / "priority.csp").read_text())
    F, d = inst.functions(), inst.domain()
    assert gico(F, d, PriorityClosure()).domain == gi(F, d).domain == naive_gfp(F, d)


class OneClosure:
    def create(self, G, d, ctx):
        return Gfp(tuple(Atomic(g) for g in G))


def test_closure_on_single_function_takes_one_turn():
    f = table_function("f", ["x"], ["x"], lambda r: {"x": fset(v for v in r["x"] if v > min(r["x"]))})
    d = Domain(("x",), (fset({1, 2, 3, 4}),))
    res = gico([f], d, OneClosure())
    assert res.turns == 1
    # every application removes the minimum, so the greatest fixed-point is empty
    assert res.domain.empty


class Rogue:
    def __init__(self, op):
        self.op = op

    def create(self, G, d, ctx):
        return self.op


def test_generator_contract():
    F = abc_functions()
    with pytest.raises(ContractViolation):
        gico(F, abc_domain(), Rogue(Atomic("nope")))
    with pytest.raises(ContractViolation):
        # the second turn reuses c1/x, which is no longer active
        gico(F, abc_domain(), Rogue(Seq((Atomic("c1/x"), Atomic("c2/z")))))


def test_duplicate_ids_rejected():
    F = abc_functions()
    with pytest.raises(StructuralError):
        registry_of(F + F[:1])


def test_update_no_change_and_disjoint_reads():
    F = registry_of(abc_functions())
    d = abc_domain()
    for policy in UpdatePolicy:
        assert update([], Atomic("c1/x"), d, d, policy, F) == []
    d = d.narrow({"y": fset({2, 3})})
    after = d.narrow({"x": fset({2})})
    # only c1 functions read x
    assert update([], Atomic("c1/x"), d, after, UpdatePolicy.DEPENDENCY, F) == ["c1/x", "c1/y"]
    # c1/y was stable before and is not after; c1/x stays stable
    assert update([], Atomic("c1/x"), d, after, UpdatePolicy.EXACT, F) == ["c1/y"]


def test_dependency_superset_of_exact():
    rng = random.Random(99)
    for seed in range(100):
        F, d = fd_random(seed)
        R = registry_of(F)
        fid = rng.choice(list(R))
        after = evaluate(Atomic(fid), d, R)
        G = [g for g in R if g != fid and rng.random() < 0.3]
        exact = update(G, Atomic(fid), d, after, UpdatePolicy.EXACT, R)
        dep = update(G, Atomic(fid), d, after, UpdatePolicy.DEPENDENCY, R)
        assert set(exact) <= set(dep)
        assert gico(F, d, Fifo(), "exact").domain == gico(F, d, Fifo(), "dependency").domain


def test_loop_invariants_hold():
    for seed in range(40):
        F, d = fd_random(seed)
        for policy in UpdatePolicy:
            gico(F, d, Fifo(), policy, check_invariants=True)
            gico(F, d, PriorityClosure(), policy, check_invariants=True)


def test_confluence_small():
    for seed in range(100):
        F, d = fd_random(seed)
        ref = naive_gfp(F, d)
        for k in range(10):
            assert gi(F, d, RandomChoice(seed * 31 + k)).domain == ref


def test_min_progress_gives_an_enclosure():
    inst = parse_instance((CORPUS / "slow.csp").read_text())
    F, d = inst.functions(), inst.domain()
    exact = gico(F, d, Fifo())
    rough = gico(F, d, Fifo(), min_progress=1e-3)
    assert leq(exact.domain, rough.domain)
    assert rough.stats.atomic_applications < exact.stats.atomic_applications
    for (_, a), (_, b) in zip(exact.domain.items(), rough.domain.items()):
        assert b.hi - a.hi <= 1e-2


def test_context_exposes_facts():
    seen = {}

    class Spy:
        def create(self, G, d, ctx):
            seen["ctx"] = ctx
            return Atomic(G[0])

    gico(abc_functions(), abc_domain(), Spy())
    ctx = seen["ctx"]
    assert isinstance(ctx, Context) and isinstance(ctx.facts, FactBase) and isinstance(ctx.stats, Stats)
    assert ctx.facts.has("idempotent", "c1/x")
