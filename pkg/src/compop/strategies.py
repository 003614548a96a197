"""Operator factories for the iteration engine.

Each strategy turns the current active set into one composition operator:
priority classes (closure of the cheapest class, or a sequence of class
closures), interval sequencing around a Gauss-Seidel function, cycle
detection with acceleration, and parallel decoupling over a partition.
"""

from __future__ import annotations

import math
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .engine import Context
from .errors import ContractViolation, ParameterError
from .functions import Kind, ReductionFunction, apply
from .lattice import EMPTY, Domain, FiniteSet, Interval, VarDomain, measure
from .operators import (
    Atomic,
    FactBase,
    Gfp,
    Operator,
    Par,
    PropertyFact,
    Seq,
    atoms,
)

STRATEGY_NAMES = ("fifo", "priority-closure", "priority-seq", "interval-seq", "cycle", "parallel")


# ---------------------------------------------------------------------------
# priorities


def priority_closure(G: Sequence[str], priorities: Mapping[str, int]) -> Gfp:
    """Closure of the active functions with the smallest priority value."""
    if not G:
        raise ContractViolation("priority_closure needs a non-empty active set")
    alpha = min(priorities[g] for g in G)
    return Gfp(tuple(atoms(g for g in G if priorities[g] == alpha)))


def priority_sequence(G: Sequence[str], priorities: Mapping[str, int]) -> Seq:
    """Sequence of per-priority closures; the smallest priority runs first."""
    if not G:
        raise ContractViolation("priority_sequence needs a non-empty active set")
    classes: dict[int, list[str]] = {}
    for g in G:
        classes.setdefault(priorities[g], []).append(g)
    # rightmost runs first, so list classes from largest to smallest value
    return Seq(tuple(Gfp(tuple(atoms(classes[a]))) for a in sorted(classes, reverse=True)))


# ---------------------------------------------------------------------------
# interval sequencing and redundancy


def interval_sequence(G: Sequence[str], h_id: str) -> Operator:
    """``Seq([Gfp(G - {h}), Gfp({h})])``: the Gauss-Seidel closure runs first."""
    if h_id not in G:
        raise ContractViolation(f"{h_id!r} is not active")
    rest = [g for g in G if g != h_id]
    h = Gfp((Atomic(h_id),))
    if not rest:
        return h
    return Seq((Gfp(tuple(atoms(rest))), h))


def redundancy_facts(F: Iterable[ReductionFunction]) -> list[PropertyFact]:
    """Box functions made redundant by the hc4 function of the same constraint.

    Holds when the box target occurs only once in the constraint.
    """
    F = list(F)
    hc4 = {f.constraint.id: f for f in F if f.kind is Kind.HC4_REVISE}
    facts = []
    for f in F:
        if f.kind is not Kind.BOX_NARROW or f.constraint.id not in hc4:
            continue
        if f.constraint.form.occurrences()[f.target] == 1:
            facts.append(
                PropertyFact("weakly_redundant", (f.id, hc4[f.constraint.id].id), "single occurrence")
            )
    return facts


def prune_redundant(
    F: Sequence[ReductionFunction], facts: Iterable[PropertyFact] | FactBase = ()
) -> list[ReductionFunction]:
    """Drop functions (weakly) redundant with a function that is kept.

    Redundancy is symmetric, so a fact's first subject is the one dropped.
    """
    fb = facts if isinstance(facts, FactBase) else FactBase(facts)
    present = {f.id for f in F}
    removed: set[str] = set()
    for kind in ("redundant", "weakly_redundant"):
        for pair in fb.pairs(kind):
            if len(pair) != 2:
                continue
            a, b = pair
            if a in present and b in present and a not in removed and b not in removed:
                removed.add(a)
    return [f for f in F if f.id not in removed]


# ---------------------------------------------------------------------------
# independence


def structurally_independent(f: ReductionFunction, g: ReductionFunction) -> bool:
    """No function writes what the other reads or writes."""
    return (
        f.writes.isdisjoint(g.reads)
        and g.writes.isdisjoint(f.reads)
        and f.writes.isdisjoint(g.writes)
    )


def independence_facts(F: Sequence[ReductionFunction]) -> list[PropertyFact]:
    return [
        PropertyFact("independent", (f.id, g.id), "structural")
        for i, f in enumerate(F)
        for g in F[i + 1 :]
        if structurally_independent(f, g)
    ]


def _independent(a: str, b: str, functions: Mapping[str, ReductionFunction], facts: FactBase | None) -> bool:
    if facts is not None and facts.has("independent", a, b):
        return True
    return structurally_independent(functions[a], functions[b])


# ---------------------------------------------------------------------------
# cycle detection and acceleration


@dataclass
class CycleHistory:
    """Last ``window`` atomic applications as ``(function id, reduction ratio)``."""

    window: int
    entries: deque = field(default_factory=deque)

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ParameterError("window must be positive")
        self.entries = deque(self.entries, maxlen=self.window)

    def push(self, fid: str, ratio: float) -> None:
        if not 0.0 <= ratio <= 1.0:
            raise ValueError(f"reduction ratio {ratio} outside [0, 1]")
        self.entries.append((fid, ratio))

    @property
    def full(self) -> bool:
        return len(self.entries) == self.window

    def clear(self) -> None:
        self.entries.clear()


def reduction_ratio(before: Domain, after: Domain) -> float:
    """``1 - measure(after) / measure(before)``, clamped to ``[0, 1]``."""
    mb, ma = measure(before), measure(after)
    if mb == 0 or mb == ma:
        return 0.0
    if math.isinf(mb):
        return 0.0 if math.isinf(ma) else 1.0
    return min(1.0, max(0.0, 1.0 - ma / mb))


def _var_ratio(before: VarDomain, after: VarDomain) -> float:
    if before is EMPTY:
        return 0.0
    if after is EMPTY:
        return 1.0
    if isinstance(before, FiniteSet):
        return 1.0 - len(after) / len(before)
    assert isinstance(before, Interval) and isinstance(after, Interval)
    wb, wa = before.width, after.width
    if wb == wa or wb == 0:
        # a point interval cannot shrink without becoming empty
        return 0.0
    if math.isinf(wb):
        return 0.0 if math.isinf(wa) else 1.0
    return 1.0 - wa / wb


def detect_cycle(history: CycleHistory, eps_ratio: float) -> frozenset[str] | None:
    """The functions of a full window of small reductions that all recur."""
    if not history.full:
        return None
    ids = [fid for fid, _ in history.entries]
    if any(r >= eps_ratio for _, r in history.entries):
        return None
    if any(ids.count(fid) < 2 for fid in ids):
        return None
    return frozenset(ids)


def cycle_accelerate(
    G_prime: Iterable[str],
    G: Sequence[str],
    d: Domain,
    functions: Mapping[str, ReductionFunction],
    facts: FactBase | None = None,
    stats=None,
) -> Operator:
    """Operator applying the best function per variable to closure, then the rest.

    Functions of the cycle independent of every other active function are
    set aside. Among the remaining ones, each variable they can narrow is
    assigned the function with the largest one-step reduction ratio of that
    variable on ``d`` (ties, zero included, to the smallest id). The result is
    ``Seq(rest..., Gfp(best))`` so the closure of the best functions runs
    first and the delayed ones are applied once afterwards.
    """
    cycle = sorted(set(G_prime))
    if not cycle:
        raise ContractViolation("cycle_accelerate needs a non-empty cycle")
    active = list(G)
    aside = [
        g for g in cycle if all(_independent(g, p, functions, facts) for p in active if p != g)
    ]
    phi = [g for g in cycle if g not in aside]
    if not phi:
        return Gfp(tuple(atoms(cycle)))

    trial = {}
    for fid in phi:
        trial[fid] = apply(functions[fid], d)
        if stats is not None:
            stats.tentative_evaluations += 1
    best: set[str] = set()
    for v in sorted(set().union(*(functions[f].writes for f in phi))):
        scored = [
            (_var_ratio(d[v], trial[f][v]), f) for f in phi if v in functions[f].writes
        ]
        top = max(r for r, _ in scored)
        best.add(min(f for r, f in scored if r == top))
    delayed = [f for f in phi if f not in best]
    return Seq(tuple(atoms(delayed)) + (Gfp(tuple(atoms(sorted(best)))),))


# ---------------------------------------------------------------------------
# parallel decoupling


def parallel_partition(
    G: Sequence[str],
    k: int,
    mode: str,
    functions: Mapping[str, ReductionFunction],
    facts: FactBase | None = None,
) -> Par:
    """Split ``G`` into ``k`` balanced blocks and decouple their Seq/Gfp.

    Blocks are filled greedily in breadth-first order of the dependency
    graph; each function goes to the open block holding most of its
    dependent neighbours (ties to the lowest block index), which keeps
    dependent functions together where sizes allow.
    """
    ids = sorted(G)
    n = len(ids)
    if not 1 <= k <= n:
        raise ParameterError(f"number of blocks must be in [1, {n}], got {k}")
    if mode not in ("seq_branch", "gfp_branch"):
        raise ParameterError(f"unknown partition mode {mode!r}")
    neighbours = {
        a: [b for b in ids if b != a and not _independent(a, b, functions, facts)] for a in ids
    }

    order: list[str] = []
    seen: set[str] = set()
    for root in ids:
        if root in seen:
            continue
        queue = deque([root])
        seen.add(root)
        while queue:
            a = queue.popleft()
            order.append(a)
            for b in neighbours[a]:
                if b not in seen:
                    seen.add(b)
                    queue.append(b)

    capacity = [n // k + (1 if i < n % k else 0) for i in range(k)]
    blocks: list[list[str]] = [[] for _ in range(k)]
    where: dict[str, int] = {}
    for a in order:
        links = [0] * k
        for b in neighbours[a]:
            if b in where:
                links[where[b]] += 1
        open_blocks = [i for i in range(k) if len(blocks[i]) < capacity[i]]
        target = max(open_blocks, key=lambda i: (links[i], -i))
        blocks[target].append(a)
        where[a] = target

    wrap = Seq if mode == "seq_branch" else Gfp
    return Par(tuple(wrap(tuple(atoms(b))) for b in blocks))


# ---------------------------------------------------------------------------
# strategy objects used by the engine


class Fifo:
    """One function per turn, in activation order."""

    def create(self, G: Sequence[str], d: Domain, ctx: Context) -> Operator:
        return Atomic(G[0])


class PriorityClosure:
    def create(self, G: Sequence[str], d: Domain, ctx: Context) -> Operator:
        return priority_closure(G, {g: ctx.functions[g].priority for g in G})


class PrioritySeq:
    def create(self, G: Sequence[str], d: Domain, ctx: Context) -> Operator:
        return priority_sequence(G, {g: ctx.functions[g].priority for g in G})


class IntervalSeq:
    """Interval sequencing around ``h``; without ``h`` it is a closure of ``G``.

    When ``h_id`` is not given, the first Gauss-Seidel function is used.
    """

    def __init__(self, h_id: str | None = None):
        self.h_id = h_id

    def create(self, G: Sequence[str], d: Domain, ctx: Context) -> Operator:
        h = self.h_id
        if h is None:
            h = next((f.id for f in ctx.functions.values() if f.kind is Kind.GAUSS_SEIDEL), None)
        if h is None or h not in G:
            return Gfp(tuple(atoms(G)))
        return interval_sequence(G, h)


class CycleAccel:
    """FIFO until a cycle of small reductions is seen, then accelerate it.

    ``window`` defaults to twice the number of functions.
    """

    def __init__(self, window: int | None = None, eps_ratio: float = 0.05):
        if window is not None and window < 1:
            raise ParameterError("window must be positive")
        if not 0.0 < eps_ratio < 1.0:
            raise ParameterError("eps_ratio must lie in (0, 1)")
        self.window = window
        self.eps_ratio = eps_ratio
        self.history: CycleHistory | None = None
        self.accelerations = 0

    def create(self, G: Sequence[str], d: Domain, ctx: Context) -> Operator:
        if self.history is None:
            self.history = CycleHistory(self.window or 2 * len(ctx.functions))
        cycle = detect_cycle(self.history, self.eps_ratio)
        if cycle is not None:
            g_prime = [g for g in G if g in cycle]
            if g_prime:
                self.history.clear()
                self.accelerations += 1
                return cycle_accelerate(g_prime, G, d, ctx.functions, ctx.facts, ctx.stats)
        return Atomic(G[0])

    def observe(self, phi: Operator, before: Domain, after: Domain, ctx: Context) -> None:
        if isinstance(phi, Atomic):
            self.history.push(phi.fid, reduction_ratio(before, after))
        else:
            self.history.clear()


class ParallelPar:
    """Decouple a ``blocks``-way partition of ``G`` each turn."""

    def __init__(self, blocks: int = 2, mode: str = "gfp_branch"):
        if blocks < 1:
            raise ParameterError("blocks must be positive")
        if mode not in ("seq_branch", "gfp_branch"):
            raise ParameterError(f"unknown partition mode {mode!r}")
        self.blocks = blocks
        self.mode = mode

    def create(self, G: Sequence[str], d: Domain, ctx: Context) -> Operator:
        return parallel_partition(G, min(self.blocks, len(G)), self.mode, ctx.functions, ctx.facts)


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = "fifo"
    threads: int = 1
    window: int | None = None
    eps_ratio: float = 0.05
    mode: str = "gfp_branch"
    h_id: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_NAMES:
            raise ParameterError(f"unknown strategy {self.kind!r}; choose from {', '.join(STRATEGY_NAMES)}")
        if self.threads < 1:
            raise ParameterError("threads must be positive")
        if self.window is not None and self.window < 1:
            raise ParameterError("window must be positive")
        if not 0.0 < self.eps_ratio < 1.0:
            raise ParameterError("eps_ratio must lie in (0, 1)")

    def build(self):
        if self.kind == "fifo":
            return Fifo()
        if self.kind == "priority-closure":
            return PriorityClosure()
        if self.kind == "priority-seq":
            return PrioritySeq()
        if self.kind == "interval-seq":
            return IntervalSeq(self.h_id)
        if self.kind == "cycle":
            return CycleAccel(self.window, self.eps_ratio)
        return ParallelPar(self.threads, self.mode)
