"""Composition operators: sequence, closure and decoupling trees over functions.

Operators are immutable trees whose leaves name reduction functions. They
are evaluated against a registry mapping function ids to
:class:`~compop.functions.ReductionFunction` objects.

``Seq([p1, ..., pk])`` is the composition ``p1 ∘ ... ∘ pk``: ``pk`` runs
first. ``Gfp`` and ``Par`` children are unordered; they are stored sorted by
their rendering so that equal sets compare equal.
"""

from __future__ import annotations

import itertools
import re
from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import Executor
from dataclasses import dataclass, fields
from typing import Union

from .errors import StructuralError
from .functions import ReductionFunction, apply
from .lattice import Domain, leq, meet, meet_all


@dataclass(frozen=True)
class Atomic:
    fid: str

    def __post_init__(self) -> None:
        if not self.fid or re.search(r"[\s,()]", self.fid):
            raise StructuralError(f"invalid function id {self.fid!r}")


@dataclass(frozen=True)
class Seq:
    children: tuple[Operator, ...]

    def __post_init__(self) -> None:
        kids = tuple(self.children)
        if not kids:
            raise StructuralError("Seq needs at least one child")
        object.__setattr__(self, "children", kids)


def _as_set(kids: Iterable[Operator], name: str) -> tuple[Operator, ...]:
    unique = {render(k): k for k in kids}
    if not unique:
        raise StructuralError(f"{name} needs at least one child")
    return tuple(unique[r] for r in sorted(unique))


@dataclass(frozen=True)
class Gfp:
    children: tuple[Operator, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", _as_set(self.children, "Gfp"))


@dataclass(frozen=True)
class Par:
    children: tuple[Operator, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", _as_set(self.children, "Par"))


Operator = Union[Atomic, Seq, Gfp, Par]


def atoms(ids: Iterable[str]) -> list[Atomic]:
    return [Atomic(i) for i in ids]


def generator(op: Operator) -> frozenset[str]:
    """Ids of all functions occurring as leaves of ``op``."""
    if isinstance(op, Atomic):
        return frozenset([op.fid])
    return frozenset().union(*(generator(c) for c in op.children))


def render(op: Operator) -> str:
    if isinstance(op, Atomic):
        return op.fid
    name = {Seq: "seq", Gfp: "gfp", Par: "par"}[type(op)]
    return f"{name}({', '.join(render(c) for c in op.children)})"


_TOKEN = re.compile(r"\s*(?:(?P<punct>[(),])|(?P<name>[^\s(),]+))")


def parse_operator(text: str) -> Operator:
    """Inverse of :func:`render`."""
    tokens: list[str] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise StructuralError(f"cannot tokenize operator at {text[pos:]!r}")
        tokens.append(m.group("punct") or m.group("name"))
        pos = m.end()
    tokens = [t for t in tokens if t]
    node, rest = _parse_op(tokens, 0)
    if rest != len(tokens):
        raise StructuralError(f"trailing input in operator {text!r}")
    return node


def _parse_op(tokens: list[str], i: int) -> tuple[Operator, int]:
    if i >= len(tokens) or tokens[i] in "(),":
        raise StructuralError("expected an operator")
    name = tokens[i]
    if i + 1 < len(tokens) and tokens[i + 1] == "(":
        cls = {"seq": Seq, "gfp": Gfp, "par": Par}.get(name)
        if cls is None:
            raise StructuralError(f"unknown combinator {name!r}")
        kids = []
        i += 2
        while True:
            kid, i = _parse_op(tokens, i)
            kids.append(kid)
            if i < len(tokens) and tokens[i] == ",":
                i += 1
                continue
            if i < len(tokens) and tokens[i] == ")":
                return cls(tuple(kids)), i + 1
            raise StructuralError("expected ',' or ')'")
    return Atomic(name), i + 1


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class Stats:
    atomic_applications: int = 0
    operators_created: int = 0
    inner_closure_passes: int = 0
    update_insertions: int = 0
    update_evaluations: int = 0
    tentative_evaluations: int = 0

    def merge(self, other: Stats) -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    def line(self) -> str:
        return (
            f"stats: apps={self.atomic_applications} ops={self.operators_created} "
            f"closure_passes={self.inner_closure_passes} updates={self.update_insertions}"
        )


Registry = Mapping[str, ReductionFunction]


def evaluate(
    op: Operator,
    d: Domain,
    registry: Registry,
    stats: Stats | None = None,
    executor: Executor | None = None,
) -> Domain:
    """Apply ``op`` to ``d``.

    ``Par`` children run on ``executor`` when one is given; each branch
    counts into its own :class:`Stats` and the results are combined in
    child order, so the outcome does not depend on scheduling.
    """
    if stats is None:
        stats = Stats()
    if d.empty:
        return d
    if isinstance(op, Atomic):
        try:
            f = registry[op.fid]
        except KeyError:
            raise StructuralError(f"unknown function id {op.fid!r}") from None
        stats.atomic_applications += 1
        return apply(f, d)
    if isinstance(op, Seq):
        x = d
        for child in reversed(op.children):
            x = evaluate(child, x, registry, stats, executor)
            if x.empty:
                break
        return x
    if isinstance(op, Gfp):
        return _closure(op.children, d, registry, stats, executor)
    if isinstance(op, Par):
        if executor is not None and len(op.children) > 1:
            branch_stats = [Stats() for _ in op.children]
            futures = [
                executor.submit(evaluate, c, d, registry, s, None)
                for c, s in zip(op.children, branch_stats)
            ]
            results = [f.result() for f in futures]
            for s in branch_stats:
                stats.merge(s)
        else:
            results = [evaluate(c, d, registry, stats, executor) for c in op.children]
        return meet_all(results)
    raise StructuralError(f"not a composition operator: {op!r}")


def _closure(
    children: Sequence[Operator],
    d: Domain,
    registry: Registry,
    stats: Stats,
    executor: Executor | None,
) -> Domain:
    # round-robin until every child has been applied once without change
    n = len(children)
    x = d
    stable = 0
    i = 0
    while stable < n:
        if i == 0:
            stats.inner_closure_passes += 1
        new = evaluate(children[i], x, registry, stats, executor)
        if new.empty:
            return new
        if new != x:
            x = new
            stable = 0
        else:
            stable += 1
        i = (i + 1) % n
    return x


def closure_literal(children: Sequence[Operator], d: Domain, registry: Registry) -> Domain:
    """Iterate ``x ↦ ∩_i child_i(x)`` until stable (reference for the closure)."""
    x = d
    while True:
        if x.empty:
            return x
        new = meet_all([evaluate(c, x, registry) for c in children])
        if new == x:
            return x
        x = new


# ---------------------------------------------------------------------------
# properties


PROPERTY_KINDS = (
    "idempotent",
    "commute",
    "semi_commutes_with",
    "stronger_than",
    "independent",
    "redundant",
    "weakly_redundant",
)
_SYMMETRIC = {"commute", "independent", "redundant", "weakly_redundant"}


@dataclass(frozen=True)
class PropertyFact:
    """A property verified on ``scope`` domains (``scope`` is their count or a label)."""

    kind: str
    subjects: tuple[str, ...]
    scope: int | str

    def __post_init__(self) -> None:
        if self.kind not in PROPERTY_KINDS:
            raise StructuralError(f"unknown property kind {self.kind!r}")


@dataclass(frozen=True)
class Refutation:
    kind: str
    subjects: tuple[str, ...]
    witness: Domain

    def __bool__(self) -> bool:
        return False


Subject = Union[ReductionFunction, Atomic, Seq, Gfp, Par, Callable[[Domain], Domain]]


def subject_name(s: Subject) -> str:
    if isinstance(s, ReductionFunction):
        return s.id
    if isinstance(s, (Atomic, Seq, Gfp, Par)):
        return render(s)
    return getattr(s, "__name__", repr(s))


def as_function(s: Subject, registry: Registry | None = None) -> Callable[[Domain], Domain]:
    if isinstance(s, ReductionFunction):
        return lambda d: apply(s, d)
    if isinstance(s, (Atomic, Seq, Gfp, Par)):
        if registry is None:
            raise StructuralError("a registry is needed to evaluate an operator")
        return lambda d: evaluate(s, d, registry)
    return s


def iterate_to_fixpoint(f: Callable[[Domain], Domain], d: Domain) -> Domain:
    """``f↑ω(d)``: apply ``f`` until nothing changes."""
    x = d
    while True:
        y = f(x)
        if y == x:
            return x
        x = y


def check_property(
    kind: str,
    f: Subject,
    g: Subject | None = None,
    scope: Sequence[Domain] = (),
    registry: Registry | None = None,
) -> PropertyFact | Refutation:
    """Check the defining equation of ``kind`` on every domain in ``scope``.

    Returns a fact recording the scope size, or a refutation carrying the
    first domain on which the equation fails.
    """
    if kind not in PROPERTY_KINDS:
        raise StructuralError(f"unknown property kind {kind!r}")
    if not scope:
        raise StructuralError("check_property needs a non-empty scope")
    if (kind == "idempotent") != (g is None):
        raise StructuralError(f"{kind!r} takes {'one subject' if kind == 'idempotent' else 'two subjects'}")
    F = as_function(f, registry)
    G = as_function(g, registry) if g is not None else None
    subjects = (subject_name(f),) if g is None else (subject_name(f), subject_name(g))

    def holds(x: Domain) -> bool:
        if kind == "idempotent":
            fx = F(x)
            return F(fx) == fx
        if kind == "commute":
            return F(G(x)) == G(F(x))
        if kind == "semi_commutes_with":
            return leq(G(F(x)), F(G(x)))
        if kind == "stronger_than":
            return leq(F(x), G(x))
        if kind == "independent":
            fg = F(G(x))
            return fg == G(F(x)) and fg == meet(F(x), G(x))
        if kind == "redundant":
            return F(x) == G(x)
        return iterate_to_fixpoint(F, x) == iterate_to_fixpoint(G, x)

    for x in scope:
        if not holds(x):
            return Refutation(kind, subjects, x)
    return PropertyFact(kind, subjects, len(scope))


class FactBase:
    """Lookup over a collection of :class:`PropertyFact`."""

    def __init__(self, facts: Iterable[PropertyFact] = ()):
        self._facts: set[tuple[str, tuple[str, ...]]] = set()
        for fact in facts:
            self.add(fact)

    def add(self, fact: PropertyFact) -> None:
        self._facts.add((fact.kind, fact.subjects))

    def has(self, kind: str, *subjects: Subject | str) -> bool:
        names = tuple(s if isinstance(s, str) else subject_name(s) for s in subjects)
        if (kind, names) in self._facts:
            return True
        return kind in _SYMMETRIC and (kind, names[::-1]) in self._facts

    def pairs(self, kind: str) -> list[tuple[str, ...]]:
        """Subjects of the stored facts of ``kind``, in the order they were recorded."""
        return sorted(subjects for k, subjects in self._facts if k == kind)

    def __len__(self) -> int:
        return len(self._facts)


def _facts(facts: Iterable[PropertyFact] | FactBase) -> FactBase:
    return facts if isinstance(facts, FactBase) else FactBase(facts)


def is_idempotent_operator(op: Operator, facts: Iterable[PropertyFact] | FactBase = ()) -> bool:
    """Sufficient conditions for idempotence of ``op``.

    True when ``op`` is a closure; a sequence whose children are idempotent
    and where each later child semi-commutes with every earlier one; a
    sequence whose first child is idempotent and where every other child is
    weaker than some child before it; or a decoupling of idempotent,
    pairwise independent children. Atomic leaves need an ``idempotent``
    fact. False means "not established", not "not idempotent".
    """
    fb = _facts(facts)
    if isinstance(op, Gfp):
        return True
    if isinstance(op, Atomic):
        return fb.has("idempotent", op.fid)
    kids = op.children

    def idem(k: Operator) -> bool:
        return fb.has("idempotent", k) or is_idempotent_operator(k, fb)

    if isinstance(op, Seq):
        semi = all(idem(k) for k in kids) and all(
            fb.has("semi_commutes_with", kids[i], kids[j])
            for i in range(len(kids))
            for j in range(i)
        )
        if semi:
            return True
        return idem(kids[0]) and all(
            any(fb.has("stronger_than", kids[j], kids[i]) for j in range(i))
            for i in range(1, len(kids))
        )
    return all(idem(k) for k in kids) and all(
        fb.has("independent", a, b) for a, b in itertools.combinations(kids, 2)
    )


def simplify_closure(
    children: Iterable[Operator],
    varphi: Operator,
    facts: Iterable[PropertyFact] | FactBase = (),
) -> Operator:
    """Rewrite ``Gfp(children ∪ {varphi})`` using independence or weak redundancy."""
    fb = _facts(facts)
    kids = list(children)
    if kids and all(fb.has("independent", varphi, k) for k in kids):
        return Par((Gfp(tuple(kids)), Gfp((varphi,))))
    if any(fb.has("weakly_redundant", varphi, k) for k in kids):
        return Gfp(tuple(kids))
    return Gfp(tuple(kids) + (varphi,))
