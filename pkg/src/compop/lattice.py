"""Computation domain: products of finite integer sets and float intervals.

Elements are ordered componentwise by inclusion and the meet is the
componentwise intersection. A product with any empty component is the
bottom element; it is stored with every component set to :data:`EMPTY` so
that all bottoms compare equal.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from typing import Union

from .errors import CapacityError, KindError, StructuralError


class _Empty:
    """The empty per-variable domain. Use the :data:`EMPTY` singleton."""

    _instance: _Empty | None = None

    def __new__(cls) -> _Empty:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EMPTY"

    def __reduce__(self):
        return (_Empty, ())


EMPTY = _Empty()


@dataclass(frozen=True)
class FiniteSet:
    """A non-empty finite set of integers."""

    values: frozenset[int]

    def __post_init__(self) -> None:
        vals = frozenset(self.values)
        if not vals:
            raise ValueError("FiniteSet must be non-empty; use EMPTY or fset()")
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in vals):
            raise ValueError(f"FiniteSet values must be integers: {sorted(vals, key=repr)}")
        object.__setattr__(self, "values", vals)

    def sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.values))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[int]:
        return iter(self.sorted())

    def __contains__(self, v: object) -> bool:
        return v in self.values

    def __repr__(self) -> str:
        return "{" + ",".join(str(v) for v in self.sorted()) + "}"


@dataclass(frozen=True)
class Interval:
    """A closed, non-empty interval ``[lo, hi]`` of 64-bit floats."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval bounds must not be NaN")
        if lo > hi:
            raise ValueError(f"interval lower bound exceeds upper bound: [{lo}, {hi}]")
        if lo == math.inf or hi == -math.inf:
            raise ValueError(f"interval must contain a real number: [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, v: object) -> bool:
        return isinstance(v, (int, float)) and self.lo <= v <= self.hi

    def __repr__(self) -> str:
        return f"[{self.lo!r}, {self.hi!r}]"


VarDomain = Union[FiniteSet, Interval, _Empty]


def fset(values: Iterable[int]) -> FiniteSet | _Empty:
    """Build a finite-set domain, returning EMPTY for no values."""
    vals = frozenset(values)
    return FiniteSet(vals) if vals else EMPTY


def interval(lo: float, hi: float) -> Interval | _Empty:
    """Build an interval domain, returning EMPTY when ``lo > hi``."""
    if math.isnan(lo) or math.isnan(hi):
        raise ValueError("interval bounds must not be NaN")
    if lo > hi or lo == math.inf or hi == -math.inf:
        return EMPTY
    return Interval(lo, hi)


def meet_var(a: VarDomain, b: VarDomain) -> VarDomain:
    if a is EMPTY or b is EMPTY:
        return EMPTY
    if isinstance(a, FiniteSet) and isinstance(b, FiniteSet):
        if a.values <= b.values:
            return a
        if b.values <= a.values:
            return b
        return fset(a.values & b.values)
    if isinstance(a, Interval) and isinstance(b, Interval):
        if b.lo <= a.lo and a.hi <= b.hi:
            return a
        if a.lo <= b.lo and b.hi <= a.hi:
            return b
        return interval(max(a.lo, b.lo), min(a.hi, b.hi))
    raise KindError(f"cannot intersect {type(a).__name__} with {type(b).__name__}")


def leq_var(a: VarDomain, b: VarDomain) -> bool:
    if a is EMPTY:
        return True
    if b is EMPTY:
        return False
    if isinstance(a, FiniteSet) and isinstance(b, FiniteSet):
        return a.values <= b.values
    if isinstance(a, Interval) and isinstance(b, Interval):
        return b.lo <= a.lo and a.hi <= b.hi
    raise KindError(f"cannot compare {type(a).__name__} with {type(b).__name__}")


def size_var(a: VarDomain) -> float:
    """Cardinality of a finite set, width of an interval, 0 for EMPTY."""
    if a is EMPTY:
        return 0
    if isinstance(a, FiniteSet):
        return len(a.values)
    return a.width


def format_var_domain(a: VarDomain) -> str:
    if a is EMPTY:
        return "{}"
    if isinstance(a, FiniteSet):
        return repr(a)
    return f"[{a.lo:.17g}, {a.hi:.17g}]"


@dataclass(frozen=True)
class Domain:
    """An element of the product semilattice.

    ``vars`` and ``doms`` are parallel tuples. If any component is EMPTY the
    whole element is bottom and all components are stored as EMPTY.
    """

    vars: tuple[str, ...]
    doms: tuple[VarDomain, ...]

    def __post_init__(self) -> None:
        names = tuple(self.vars)
        doms = tuple(self.doms)
        if len(names) != len(doms):
            raise StructuralError("vars and doms must have equal length")
        if len(set(names)) != len(names):
            raise StructuralError(f"duplicate variable names in {names}")
        for v, dom in zip(names, doms):
            if not (dom is EMPTY or isinstance(dom, (FiniteSet, Interval))):
                raise KindError(f"variable {v!r} has non-domain value {dom!r}")
        if any(dom is EMPTY for dom in doms):
            doms = (EMPTY,) * len(doms)
        object.__setattr__(self, "vars", names)
        object.__setattr__(self, "doms", doms)

    @classmethod
    def from_dict(cls, mapping: Mapping[str, VarDomain]) -> Domain:
        return cls(tuple(mapping), tuple(mapping.values()))

    @property
    def empty(self) -> bool:
        return bool(self.doms) and self.doms[0] is EMPTY

    def index(self, name: str) -> int:
        try:
            return self.vars.index(name)
        except ValueError:
            raise StructuralError(f"unknown variable {name!r}") from None

    def __getitem__(self, name: str) -> VarDomain:
        return self.doms[self.index(name)]

    def __contains__(self, name: object) -> bool:
        return name in self.vars

    def items(self) -> Iterator[tuple[str, VarDomain]]:
        return zip(self.vars, self.doms)

    def as_dict(self) -> dict[str, VarDomain]:
        return dict(zip(self.vars, self.doms))

    def replace(self, updates: Mapping[str, VarDomain]) -> Domain:
        """Return a copy with some components replaced (no intersection)."""
        if not updates:
            return self
        doms = list(self.doms)
        for name, dom in updates.items():
            doms[self.index(name)] = dom
        return Domain(self.vars, tuple(doms))

    def narrow(self, updates: Mapping[str, VarDomain]) -> Domain:
        """Intersect some components with the given values."""
        if self.empty or not updates:
            return self
        doms = list(self.doms)
        changed = False
        for name, dom in updates.items():
            i = self.index(name)
            new = meet_var(doms[i], dom)
            if new is EMPTY:
                return self.bottom()
            if new != doms[i]:
                doms[i] = new
                changed = True
        return Domain(self.vars, tuple(doms)) if changed else self

    def bottom(self) -> Domain:
        return Domain(self.vars, (EMPTY,) * len(self.vars))

    def __repr__(self) -> str:
        if self.empty:
            return "Domain(empty)"
        inner = ", ".join(f"{v}={d!r}" for v, d in self.items())
        return f"Domain({inner})"

    def render(self) -> str:
        if self.empty:
            return "empty"
        return " ".join(f"{v}={format_var_domain(d)}" for v, d in self.items())


def _check_same_vars(a: Domain, b: Domain) -> None:
    if a.vars != b.vars:
        raise StructuralError(f"variable lists differ: {a.vars} vs {b.vars}")


def meet(a: Domain, b: Domain) -> Domain:
    """Componentwise intersection."""
    _check_same_vars(a, b)
    if a.empty:
        return a
    if b.empty:
        return b
    return Domain(a.vars, tuple(meet_var(x, y) for x, y in zip(a.doms, b.doms)))


def meet_all(domains: Sequence[Domain]) -> Domain:
    if not domains:
        raise StructuralError("meet of an empty collection is undefined")
    result = domains[0]
    for d in domains[1:]:
        result = meet(result, d)
    return result


def leq(a: Domain, b: Domain) -> bool:
    """``a ⊆ b`` componentwise; bottom is below everything."""
    _check_same_vars(a, b)
    if a.empty:
        return True
    if b.empty:
        return False
    return all(leq_var(x, y) for x, y in zip(a.doms, b.doms))


def measure(d: Domain) -> float:
    """Sum of cardinalities (finite sets) and widths (intervals); 0 for bottom."""
    if d.empty:
        return 0
    return sum(size_var(x) for x in d.doms)


def changed_vars(before: Domain, after: Domain, min_progress: float = 0.0) -> frozenset[str]:
    """Variables whose component differs between two domains.

    With ``min_progress > 0`` interval components whose bounds each moved by
    less than ``min_progress`` are reported as unchanged.
    """
    _check_same_vars(before, after)
    out = []
    for v, x, y in zip(before.vars, before.doms, after.doms):
        if x == y:
            continue
        if (
            min_progress > 0
            and isinstance(x, Interval)
            and isinstance(y, Interval)
            and (y.lo - x.lo) < min_progress
            and (x.hi - y.hi) < min_progress
        ):
            continue
        out.append(v)
    return frozenset(out)


def enumerate_lattice(
    universes: Mapping[str, Iterable[int]], max_elements: int = 1_000_000
) -> list[Domain]:
    """Every combination of per-variable subsets of the given universes.

    Combinations with an empty component are all the bottom element, so the
    returned list contains bottom once per such combination.
    """
    subsets: list[list[VarDomain]] = []
    total = 1
    for name, universe in universes.items():
        u = sorted(set(universe))
        total *= 2 ** len(u)
        if total > max_elements:
            raise CapacityError(
                f"lattice has more than {max_elements} elements (at variable {name!r})"
            )
        subsets.append(
            [fset(c) for r in range(len(u) + 1) for c in itertools.combinations(u, r)]
        )
    names = tuple(universes)
    return [Domain(names, combo) for combo in itertools.product(*subsets)]
