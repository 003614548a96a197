"""Brute-force references for the engine.

Everything here is deliberately slow and simple: round-robin iteration for
the greatest common fixed-point, decomposition checks over sampled or
enumerated lattices, and an exhaustive harness that checks the algebraic
results (contractance, monotonicity, fixed-point characterisations,
idempotence conditions, closure rewrites) on small random lattices.
"""

from __future__ import annotations

import itertools
import math
import random
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .engine import RandomChoice, gi
from .errors import StructuralError
from .expr import Add, Const, Mul, Var
from .functions import (
    ArithCmp,
    Constraint,
    ExtensionalBinary,
    ReductionFunction,
    apply,
    revise,
    table_function,
)
from .lattice import Domain, Interval, enumerate_lattice, fset, leq
from .operators import (
    Atomic,
    FactBase,
    Gfp,
    Operator,
    Par,
    PropertyFact,
    Seq,
    atoms,
    check_property,
    evaluate,
    generator,
    is_idempotent_operator,
    render,
    simplify_closure,
)

DomainMap = Callable[[Domain], Domain]


def _as_map(f: ReductionFunction | DomainMap) -> DomainMap:
    if isinstance(f, ReductionFunction):
        return lambda d: apply(f, d)
    return f


def naive_gfp(F: Iterable[ReductionFunction | DomainMap], d0: Domain) -> Domain:
    """Round-robin until one full pass changes nothing."""
    fs = [_as_map(f) for f in F]
    d = d0
    while True:
        if d.empty:
            return d
        changed = False
        for f in fs:
            new = f(d)
            if new != d:
                d = new
                changed = True
        if not changed:
            return d


def domains_close(a: Domain, b: Domain, tol: float = 0.0) -> bool:
    """Equality, with an absolute per-bound tolerance on interval components."""
    if a.vars != b.vars:
        return False
    if a.empty or b.empty:
        return a.empty and b.empty
    for x, y in zip(a.doms, b.doms):
        if isinstance(x, Interval) and isinstance(y, Interval):
            for p, q in ((x.lo, y.lo), (x.hi, y.hi)):
                if p != q and not abs(p - q) <= tol:
                    return False
        elif x != y:
            return False
    return True


def max_ulp_distance(a: Domain, b: Domain) -> int:
    """Largest distance in representable floats between matching bounds."""
    if a.empty or b.empty:
        return 0 if a.empty and b.empty else math.inf
    worst = 0
    for x, y in zip(a.doms, b.doms):
        if isinstance(x, Interval):
            for p, q in ((x.lo, y.lo), (x.hi, y.hi)):
                worst = max(worst, _ulps(p, q))
        elif x != y:
            return math.inf
    return worst


def _ulps(p: float, q: float) -> int:
    if p == q:
        return 0
    if math.isinf(p) or math.isinf(q):
        return math.inf
    steps = 0
    lo, hi = min(p, q), max(p, q)
    while lo < hi and steps <= 64:
        lo = math.nextafter(lo, math.inf)
        steps += 1
    return steps


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class DecompositionClaim:
    coarse: tuple[str, ...]
    fine: tuple[str, ...]
    holds: bool
    scope: int
    witness: Domain | None = None

    def __bool__(self) -> bool:
        return self.holds


def check_decomposition(
    F: Sequence[ReductionFunction],
    G: Sequence[ReductionFunction],
    samples: Iterable[Domain],
) -> DecompositionClaim:
    """Compare the closures of ``F`` and of its finer version ``G`` on samples."""
    if len(G) <= len(F):
        raise StructuralError(
            f"a decomposition must have more functions than the original ({len(G)} <= {len(F)})"
        )
    samples = list(samples)
    if not samples:
        raise StructuralError("check_decomposition needs at least one sample")
    names = tuple(f.id for f in F), tuple(g.id for g in G)
    for i, d in enumerate(samples):
        if naive_gfp(F, d) != naive_gfp(G, d):
            return DecompositionClaim(*names, False, i + 1, d)
    return DecompositionClaim(*names, True, len(samples))


def whole_arc_function(c: Constraint, id: str | None = None) -> ReductionFunction:
    """Both revise directions of a binary constraint applied to the same input."""
    x, y = c.vars
    form = c.form

    def narrowing(read):
        d = Domain((x, y), (read[x], read[y]))
        return {x: revise(form, x, d)[x], y: revise(form, y, d)[y]}

    return table_function(id or f"{c.id}/arc", [x, y], [x, y], narrowing)


# ---------------------------------------------------------------------------
# random generators


def random_table_function(
    rng: random.Random,
    id: str,
    universes: Mapping[str, Sequence[int]],
    reads: Sequence[str] | None = None,
    writes: Sequence[str] | None = None,
    density: float = 0.6,
) -> ReductionFunction:
    """A projection-form function with random narrowing tables.

    Each written variable gets a random subset of its universe per point of
    the read variables' product; the narrowing of a read domain is the union
    of those subsets over its points, which makes it monotonic.
    """
    names = list(universes)
    if writes is None:
        writes = [rng.choice(names)] if rng.random() < 0.8 else names
    if reads is None:
        reads = [v for v in names if rng.random() < 0.6]
    reads = list(reads)
    tables = {}
    for w in writes:
        tables[w] = {
            point: frozenset(v for v in universes[w] if rng.random() < density)
            for point in itertools.product(*(universes[r] for r in reads))
        }

    def narrowing(read):
        out = {}
        for w in writes:
            values: set[int] = set()
            for point in itertools.product(*(read[r].sorted() for r in reads)):
                values |= tables[w].get(point, frozenset())
            out[w] = fset(values)
        return out

    return table_function(id, reads, writes, narrowing)


def random_operator(rng: random.Random, fids: Sequence[str], depth: int = 2) -> Operator:
    if depth == 0 or rng.random() < 0.3:
        return Atomic(rng.choice(fids))
    kind = rng.choice((Seq, Gfp, Par))
    kids = tuple(random_operator(rng, fids, depth - 1) for _ in range(rng.randint(1, 3)))
    return kind(kids)


_RELS = ("<", "<=", "=", "!=", ">", ">=")


def random_fd_instance(
    rng: random.Random, max_vars: int = 4, universe: int = 4, max_constraints: int = 6
) -> tuple[list[Constraint], Domain]:
    """Random binary constraints over small finite domains."""
    n = rng.randint(2, max_vars)
    names = [f"v{i}" for i in range(n)]
    doms = []
    for _ in names:
        values = [v for v in range(1, universe + 1) if rng.random() < 0.8]
        doms.append(fset(values or [rng.randint(1, universe)]))
    cons = []
    for k in range(rng.randint(1, max_constraints)):
        x, y = rng.sample(names, 2)
        if rng.random() < 0.7:
            form = ArithCmp(Var(x), rng.choice(_RELS), Var(y))
        else:
            pairs = itertools.product(range(1, universe + 1), repeat=2)
            form = ExtensionalBinary(x, y, frozenset(p for p in pairs if rng.random() < 0.4))
        cons.append(Constraint(f"c{k}", form))
    return cons, Domain(tuple(names), tuple(doms))


def random_single_occurrence(rng: random.Random) -> tuple[Constraint, Domain]:
    """A random linear constraint where every variable occurs once."""
    n = rng.randint(2, 3)
    names = [f"x{i}" for i in range(n)]
    terms = []
    for v in names:
        coef = rng.choice((1.0, -1.0, 2.0, -0.5, 3.0))
        terms.append(Var(v) if coef == 1.0 else Mul(Const(coef), Var(v)))
    lhs = terms[0]
    for t in terms[1:]:
        lhs = Add(lhs, t)
    rel = rng.choice(("=", "<=", ">="))
    rhs = Const(float(rng.randint(-5, 5)))
    doms = []
    for _ in names:
        lo = float(rng.randint(-10, 5))
        doms.append(Interval(lo, lo + rng.choice((1.0, 2.5, 5.0, 10.0))))
    return Constraint("c", ArithCmp(lhs, rel, rhs)), Domain(tuple(names), tuple(doms))


# ---------------------------------------------------------------------------
# exhaustive verification of the algebra


@dataclass
class ClauseResult:
    name: str
    scope: int
    passed: bool
    witness: str = "-"

    def line(self) -> str:
        return f"CLAUSE {self.name} scope={self.scope} {'PASS' if self.passed else 'FAIL'} witness={self.witness}"


@dataclass
class Report:
    seed: int
    clauses: list[ClauseResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def failures(self) -> list[ClauseResult]:
        return [c for c in self.clauses if not c.passed]

    def lines(self) -> list[str]:
        return [c.line() for c in self.clauses]


class _Lab:
    """Random functions and memoized evaluation tables over one lattice."""

    def __init__(self, rng: random.Random, n_vars: int, universe: int):
        self.rng = rng
        self.universes = {v: list(range(1, universe + 1)) for v in "xyzw"[:n_vars]}
        self.elements = list(dict.fromkeys(enumerate_lattice(self.universes)))
        self.registry: dict[str, ReductionFunction] = {}
        self._tables: dict[str, dict[Domain, Domain]] = {}
        self.pairs = [(d, e) for d in self.elements for e in self.elements if d != e and leq(d, e)]

    def add(self, f: ReductionFunction) -> str:
        self.registry[f.id] = f
        return f.id

    def table(self, op: Operator) -> dict[Domain, Domain]:
        key = render(op)
        if key not in self._tables:
            self._tables[key] = {d: evaluate(op, d, self.registry) for d in self.elements}
        return self._tables[key]

    def fn(self, op: Operator) -> DomainMap:
        t = self.table(op)
        return lambda d: t[d] if d in t else evaluate(op, d, self.registry)

    def fact(self, kind: str, a: Operator, b: Operator | None = None) -> PropertyFact | None:
        r = check_property(kind, self.fn(a), None if b is None else self.fn(b), self.elements)
        if not r:
            return None
        subjects = (render(a),) if b is None else (render(a), render(b))
        return PropertyFact(kind, subjects, r.scope)


def _show(d: Domain) -> str:
    return d.render()


def _check_all(name: str, items: Iterable, ok: Callable, show: Callable) -> ClauseResult:
    n = 0
    for item in items:
        n += 1
        if not ok(item):
            return ClauseResult(name, n, False, show(item))
    return ClauseResult(name, n, True)


def verify_lemma_suite(
    seed: int = 0,
    n_vars: int = 2,
    universe: int = 3,
    n_functions: int = 5,
    n_trees: int = 12,
    plant_fault: str | None = None,
) -> Report:
    """Exhaustively check the algebraic results on random functions and trees.

    ``plant_fault`` injects a known defect: ``"nonmonotone"`` adds a
    contracting but non-monotonic function, ``"dependent-pair"`` adds a
    decoupling of two dependent functions together with a false
    independence fact.
    """
    if plant_fault not in (None, "nonmonotone", "dependent-pair"):
        raise StructuralError(f"unknown planted fault {plant_fault!r}")
    if n_vars < 2:
        raise StructuralError("the lemma suite needs at least two variables")
    rng = random.Random(seed)
    lab = _Lab(rng, n_vars, universe)
    names = list(lab.universes)
    report = Report(seed)
    E = lab.elements

    # one unary function per variable guarantees independent pairs exist
    fids = [lab.add(random_table_function(rng, f"u{v}", lab.universes, [v], [v])) for v in names]
    fids += [
        lab.add(random_table_function(rng, f"f{i}", lab.universes)) for i in range(n_functions)
    ]
    planted_facts: list[PropertyFact] = []
    if plant_fault == "nonmonotone":
        v = names[0]

        def odd(read):
            s = read[v]
            return {v: s if len(s) <= 1 else fset([min(s)])}

        fids.append(lab.add(table_function("planted", [v], [v], odd)))
    elif plant_fault == "dependent-pair":
        x, y = names[0], names[1]
        lab.add(table_function("p1", [y], [x], lambda r: {x: fset(a for a in lab.universes[x] if a < max(r[y]))}))
        lab.add(table_function("p2", [x], [y], lambda r: {y: fset(b for b in lab.universes[y] if b < max(r[x]))}))
        planted_facts = [
            PropertyFact("idempotent", ("p1",), "planted"),
            PropertyFact("idempotent", ("p2",), "planted"),
            PropertyFact("independent", ("p1", "p2"), "planted"),
        ]

    trees = [random_operator(rng, fids) for _ in range(n_trees)]
    if plant_fault == "nonmonotone":
        trees.append(Seq((Atomic("planted"), Atomic(fids[0]))))

    def contracting(op):
        t = lab.table(op)
        return _check_all("", E, lambda d: leq(t[d], d), _show)

    def monotonic(op):
        t = lab.table(op)
        return _check_all(
            "", lab.pairs, lambda p: leq(t[p[0]], t[p[1]]), lambda p: f"d=({_show(p[0])}) e=({_show(p[1])})"
        )

    def combine(name: str, results: list[ClauseResult]) -> ClauseResult:
        scope = sum(r.scope for r in results)
        for r in results:
            if not r.passed:
                return ClauseResult(name, scope, False, r.witness)
        return ClauseResult(name, scope, True)

    leaf_ops = [Atomic(f) for f in fids]
    report.clauses.append(combine("functions.contracting", [contracting(o) for o in leaf_ops]))
    report.clauses.append(combine("functions.monotonic", [monotonic(o) for o in leaf_ops]))
    report.clauses.append(combine("operators.contracting", [contracting(t) for t in trees]))
    report.clauses.append(combine("operators.monotonic", [monotonic(t) for t in trees]))

    # fixed points of an operator are the common fixed points of its generator
    def same_fixed_points(op):
        t = lab.table(op)
        gen = [lab.table(Atomic(f)) for f in generator(op)]
        return _check_all("", E, lambda d: (t[d] == d) == all(g[d] == d for g in gen), _show)

    report.clauses.append(combine("operators.fixed_points", [same_fixed_points(t) for t in trees]))

    # an iteration of operators covering F stabilizes at the closure of F
    F_clean = [lab.registry[f] for f in fids]
    results = []
    for _ in range(3):
        phis = [random_operator(rng, fids) for _ in range(rng.randint(1, 3))]
        missing = set(fids) - set().union(*(generator(p) for p in phis))
        phis += atoms(sorted(missing))
        maps = [lab.table(p) for p in phis]

        def iterate(d, maps=maps):
            while True:
                new = d
                for m in maps:
                    new = m[new]
                if new == d:
                    return d
                d = new

        results.append(_check_all("", E, lambda d: iterate(d) == naive_gfp(F_clean, d), _show))
    report.clauses.append(combine("iteration.closure", results))

    def idempotent_when_certified(ops: Iterable[Operator], extra: Sequence[PropertyFact] = ()):
        out = []
        for op in ops:
            fb = FactBase(extra)
            kids = op.children if not isinstance(op, Atomic) else ()
            for k in kids:
                f = lab.fact("idempotent", k)
                if f:
                    fb.add(f)
            for a, b in itertools.permutations(kids, 2):
                for kind in ("semi_commutes_with", "stronger_than", "independent"):
                    f = lab.fact(kind, a, b)
                    if f:
                        fb.add(f)
            if not is_idempotent_operator(op, fb):
                continue
            t = lab.table(op)
            out.append(_check_all("", E, lambda d: t[t[d]] == t[d], _show))
        return out

    def gfp_of(k: int) -> Gfp:
        return Gfp(tuple(atoms(rng.sample(fids, k))))

    report.clauses.append(
        combine("idempotent.closure", [_check_all("", E, lambda d, t=lab.table(g): t[t[d]] == t[d], _show)
                            for g in [gfp_of(2), gfp_of(3), Gfp(tuple(trees[:2]))]])
    )

    seq_ii = []
    for _ in range(4):
        a = atoms(rng.sample(fids, 2))
        b = [Atomic(rng.choice(fids))]
        seq_ii.append(Seq((Gfp(tuple(a)), Gfp(tuple(a + b)))))
        seq_ii.append(Seq((gfp_of(2), gfp_of(2))))
    report.clauses.append(combine("idempotent.semi_commuting_seq", idempotent_when_certified(seq_ii)))

    seq_iii = []
    for _ in range(4):
        a = atoms(rng.sample(fids, 2))
        b = [Atomic(rng.choice(fids))]
        seq_iii.append(Seq((Gfp(tuple(a + b)), Gfp(tuple(a)), Atomic(a[0].fid))))
        seq_iii.append(Seq((gfp_of(2), Atomic(rng.choice(fids)))))
    report.clauses.append(combine("idempotent.dominated_seq", idempotent_when_certified(seq_iii)))

    par_iv = [Par((Gfp((Atomic(fids[0]),)), Gfp((Atomic(fids[1]),))))]
    par_iv += [Par((gfp_of(1), gfp_of(2))) for _ in range(4)]
    iv = idempotent_when_certified(par_iv)
    if plant_fault == "dependent-pair":
        iv += idempotent_when_certified([Par((Atomic("p1"), Atomic("p2")))], planted_facts)
    report.clauses.append(combine("idempotent.independent_par", iv))

    # closure rewrites
    p21, p22 = [], []
    for _ in range(4):
        kids = atoms(rng.sample(fids, 2))
        for varphi in leaf_ops + trees[:3]:
            fb = FactBase()
            for k in kids:
                f = lab.fact("independent", varphi, k)
                if f:
                    fb.add(f)
                f = lab.fact("weakly_redundant", varphi, k)
                if f:
                    fb.add(f)
            rewritten = simplify_closure(kids, varphi, fb)
            full = Gfp(tuple(kids) + (varphi,))
            if isinstance(rewritten, Par):
                target = p21
            elif render(rewritten) != render(full):
                target = p22
            else:
                continue
            a, b = lab.table(rewritten), lab.table(full)
            target.append(_check_all("", E, lambda d, a=a, b=b: a[d] == b[d], _show))
    # a guaranteed independent case: unary functions on different variables
    a, b = lab.table(Par((Gfp((leaf_ops[0],)), Gfp((leaf_ops[1],))))), lab.table(Gfp(tuple(leaf_ops[:2])))
    p21.append(_check_all("", E, lambda d: a[d] == b[d], _show))
    # a guaranteed weakly redundant case: an operator and its own closure
    twin = Gfp((leaf_ops[2],))
    fb = FactBase([lab.fact("weakly_redundant", twin, leaf_ops[2])])
    s, f = lab.table(simplify_closure([leaf_ops[2]], twin, fb)), lab.table(Gfp((leaf_ops[2], twin)))
    p22.append(_check_all("", E, lambda d: s[d] == f[d], _show))
    report.clauses.append(combine("rewrite.independent", p21))
    report.clauses.append(combine("rewrite.redundant", p22))

    # any fair order of single applications reaches the same closure
    conf = []
    for k in range(3):
        choose = RandomChoice(seed * 1000 + k)
        conf.append(_check_all("", E, lambda d: gi(F_clean, d, choose).domain == naive_gfp(F_clean, d), _show))
    report.clauses.append(combine("confluence", conf))

    # replacing one function by a decomposition of it keeps the closure
    dec = []
    for _ in range(2):
        parts = [lab.registry[f] for f in rng.sample(fids, 3)]
        rest = [f for f in F_clean if f not in parts][:2]
        all_vars = names

        def whole(read, parts=parts):
            return naive_gfp(parts, Domain(tuple(all_vars), tuple(read[v] for v in all_vars))).as_dict()

        f0 = table_function(f"f0_{len(dec)}", all_vars, all_vars, whole)
        claim = check_decomposition([f0], parts, E)
        if not claim:
            dec.append(ClauseResult("", claim.scope, False, _show(claim.witness)))
            continue
        dec.append(_check_all("", E, lambda d, f0=f0, parts=parts, rest=rest:
                              naive_gfp(parts + rest, d) == naive_gfp([f0] + rest, d), _show))
    report.clauses.append(combine("decomposition", dec))
    return report
