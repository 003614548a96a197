"""Generic iteration over reduction functions and composition operators.

``gico`` repeatedly asks a strategy for an operator on the active set ``G``,
removes the operator's generator from ``G``, re-activates functions chosen by
the update policy, and applies the operator. ``gi`` is the special case where
every operator is a single function picked by a choose policy.
"""

from __future__ import annotations

import enum
import random
from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

from .errors import ContractViolation, StructuralError
from .functions import ReductionFunction, apply
from .lattice import Domain, changed_vars, leq
from .operators import (
    Atomic,
    FactBase,
    Operator,
    PropertyFact,
    Stats,
    evaluate,
    generator,
    is_idempotent_operator,
    render,
)


class UpdatePolicy(enum.Enum):
    EXACT = "exact"
    DEPENDENCY = "dependency"


@dataclass
class Context:
    """What strategies may look at when creating operators."""

    functions: dict[str, ReductionFunction]
    facts: FactBase
    stats: Stats
    executor: ThreadPoolExecutor | None = None


class Strategy(Protocol):
    def create(self, G: Sequence[str], d: Domain, ctx: Context) -> Operator: ...


@dataclass
class Result:
    domain: Domain
    stats: Stats
    turns: int
    trace: list[str] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return self.domain.empty


def registry_of(F: Iterable[ReductionFunction] | Mapping[str, ReductionFunction]) -> dict[str, ReductionFunction]:
    if isinstance(F, Mapping):
        return dict(F)
    out: dict[str, ReductionFunction] = {}
    for f in F:
        if f.id in out:
            raise StructuralError(f"duplicate function id {f.id!r}")
        out[f.id] = f
    return out


def declared_facts(F: Iterable[ReductionFunction]) -> list[PropertyFact]:
    """Idempotence facts for functions that declare it."""
    return [PropertyFact("idempotent", (f.id,), "declared") for f in F if f.idempotent]


def update(
    G: Iterable[str],
    phi: Operator,
    d: Domain,
    d_after: Domain,
    policy: UpdatePolicy,
    functions: Mapping[str, ReductionFunction],
    facts: FactBase | None = None,
    min_progress: float = 0.0,
    stats: Stats | None = None,
) -> list[str]:
    """Functions to re-activate after ``phi`` took ``d`` to ``d_after``.

    ``G`` is the active set after removing ``phi``'s generator. The result
    lists ids in registry order.
    """
    changed = changed_vars(d, d_after, min_progress)
    if not changed or d_after.empty:
        return []
    active = set(G)
    gen = generator(phi)
    if policy is UpdatePolicy.EXACT:
        out = []
        for fid, f in functions.items():
            if fid in active:
                continue
            if stats is not None:
                stats.update_evaluations += 1
            if apply(f, d_after) == d_after:
                continue
            if fid in gen:
                out.append(fid)
                continue
            if stats is not None:
                stats.update_evaluations += 1
            if apply(f, d) == d:
                out.append(fid)
        return out
    skip_gen = is_idempotent_operator(phi, facts or FactBase())
    return [
        fid
        for fid, f in functions.items()
        if fid not in active
        and not (skip_gen and fid in gen)
        and not f.reads.isdisjoint(changed)
    ]


def gico(
    F: Iterable[ReductionFunction] | Mapping[str, ReductionFunction],
    d0: Domain,
    strategy: Strategy,
    policy: UpdatePolicy | str = UpdatePolicy.DEPENDENCY,
    facts: Iterable[PropertyFact] = (),
    threads: int = 1,
    min_progress: float = 0.0,
    check_invariants: bool = False,
    trace: bool = False,
) -> Result:
    """Propagate ``d0`` to the greatest common fixed-point of ``F``.

    ``min_progress`` (off by default) ignores interval reductions smaller
    than the given width when deciding what to re-activate; the result is
    then an enclosure of the fixed-point rather than the fixed-point itself.
    """
    policy = UpdatePolicy(policy)
    functions = registry_of(F)
    fb = FactBase(declared_facts(functions.values()))
    for fact in facts:
        fb.add(fact)
    stats = Stats()
    lines: list[str] = []
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    ctx = Context(functions, fb, stats, executor)
    G: dict[str, None] = dict.fromkeys(functions)
    d = d0
    turns = 0
    try:
        while G:
            if d.empty:
                # bottom is a fixed-point of every function
                G.clear()
                break
            phi = strategy.create(list(G), d, ctx)
            stats.operators_created += 1
            gen = generator(phi)
            if not gen or not gen <= G.keys():
                raise ContractViolation(
                    f"strategy returned {render(phi)} whose generator is not a non-empty subset of G"
                )
            size_before = len(G)
            for fid in gen:
                del G[fid]
            d_after = evaluate(phi, d, functions, stats, executor)
            observe = getattr(strategy, "observe", None)
            if observe is not None:
                observe(phi, d, d_after, ctx)
            inserted = update(G, phi, d, d_after, policy, functions, fb, min_progress, stats)
            stats.update_insertions += len(inserted)
            G.update(dict.fromkeys(inserted))
            turns += 1
            if trace:
                changed = sorted(changed_vars(d, d_after))
                lines.append(
                    f"turn {turns}: op={render(phi)} changed={','.join(changed) or '-'} "
                    f"inserted={','.join(inserted) or '-'} |G| {size_before}->{len(G)}"
                )
            if check_invariants:
                _check_turn(functions, G, d, d_after, size_before, min_progress)
            d = d_after
    finally:
        if executor is not None:
            executor.shutdown()
    return Result(d, stats, turns, lines)


def _check_turn(
    functions: Mapping[str, ReductionFunction],
    G: Mapping[str, None],
    d: Domain,
    d_after: Domain,
    size_before: int,
    min_progress: float,
) -> None:
    if not leq(d_after, d):
        raise ContractViolation("domain grew during a loop turn")
    if d_after == d and len(G) >= size_before:
        raise ContractViolation("loop turn neither reduced the domain nor the active set")
    if min_progress > 0:
        return
    for fid, f in functions.items():
        if fid not in G and apply(f, d_after) != d_after:
            raise ContractViolation(f"inactive function {fid!r} is not at a fixed-point")


# ---------------------------------------------------------------------------
# GI


def fifo(G: Sequence[str]) -> str:
    return G[0]


class RandomChoice:
    """Choose uniformly from ``G`` with a seeded generator."""

    def __init__(self, seed: int | None = None):
        self.rng = random.Random(seed)

    def __call__(self, G: Sequence[str]) -> str:
        return G[self.rng.randrange(len(G))]


class _Choose:
    def __init__(self, choose: Callable[[Sequence[str]], str]):
        self.choose = choose

    def create(self, G: Sequence[str], d: Domain, ctx: Context) -> Operator:
        return Atomic(self.choose(G))


def gi(
    F: Iterable[ReductionFunction] | Mapping[str, ReductionFunction],
    d0: Domain,
    choose: Callable[[Sequence[str]], str] = fifo,
    policy: UpdatePolicy | str = UpdatePolicy.DEPENDENCY,
    check_invariants: bool = False,
    trace: bool = False,
) -> Result:
    """Generic iteration applying one chosen function per turn."""
    return gico(F, d0, _Choose(choose), policy, check_invariants=check_invariants, trace=trace)
