"""Constraints and the reduction functions derived from them.

Every function is in projection form: it intersects its written variables
with a value computed from its read variables only. ``apply`` dispatches on
the function kind.
"""

from __future__ import annotations

import enum
import math
import operator
import struct
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Union

from . import intervals as iv
from .errors import KindError, ParameterError, StructuralError
from .expr import Add, Const, Expr, Mul, Neg, Sqr, Sub, Var, evaluate, occurrences, variables
from .lattice import Domain, FiniteSet, Interval, VarDomain, fset

# ---------------------------------------------------------------------------
# constraints


@dataclass(frozen=True)
class ExtensionalBinary:
    """Binary constraint given by its allowed ``(x, y)`` tuples."""

    x: str
    y: str
    allowed: frozenset[tuple[int, int]]

    @property
    def vars(self) -> tuple[str, ...]:
        return (self.x, self.y)


RELATIONS: dict[str, Callable[[float, float], bool]] = {
    "=": operator.eq,
    "<=": operator.le,
    ">=": operator.ge,
    "<": operator.lt,
    ">": operator.gt,
    "!=": operator.ne,
}


@dataclass(frozen=True)
class ArithCmp:
    """``lhs rel rhs`` with ``rel`` one of ``= <= >= < > !=``.

    Over intervals, strict relations are narrowed like their non-strict
    counterparts and ``!=`` is never narrowed; both choices are sound.
    """

    lhs: Expr
    rel: str
    rhs: Expr

    def __post_init__(self) -> None:
        if self.rel not in RELATIONS:
            raise StructuralError(f"unknown relation {self.rel!r}")

    @property
    def vars(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(variables(self.lhs) + variables(self.rhs)))

    def occurrences(self) -> dict[str, int]:
        return dict(occurrences(self.lhs) + occurrences(self.rhs))

    def holds(self, env: Mapping[str, float | int]) -> bool:
        return RELATIONS[self.rel](evaluate(self.lhs, env), evaluate(self.rhs, env))


@dataclass(frozen=True)
class LinearSystem:
    """Square system ``A x = b`` with interval coefficients and right-hand side."""

    vars: tuple[str, ...]
    matrix: tuple[tuple[iv.I, ...], ...]
    rhs: tuple[iv.I, ...]

    def __post_init__(self) -> None:
        n = len(self.vars)
        if n == 0 or len(self.matrix) != n or len(self.rhs) != n:
            raise StructuralError("linear system must be square and non-empty")
        if len(set(self.vars)) != n:
            raise StructuralError("linear system variables must be distinct")
        for i, row in enumerate(self.matrix):
            if len(row) != n:
                raise StructuralError(f"row {i} of the linear system has {len(row)} entries, expected {n}")
            for lo, hi in list(row) + [self.rhs[i]]:
                if math.isnan(lo) or math.isnan(hi) or lo > hi:
                    raise StructuralError(f"invalid interval coefficient [{lo}, {hi}] in row {i}")
            if iv.contains_zero(row[i]):
                raise ParameterError(f"diagonal coefficient of row {i} contains zero: {row[i]}")


Form = Union[ExtensionalBinary, ArithCmp, LinearSystem]


@dataclass(frozen=True)
class Constraint:
    id: str
    form: Form
    priority: int | None = None

    @property
    def vars(self) -> tuple[str, ...]:
        return self.form.vars


# ---------------------------------------------------------------------------
# reduction functions


class Kind(enum.Enum):
    REVISE = "revise"
    HC4_REVISE = "hc4"
    BOX_NARROW = "box"
    GAUSS_SEIDEL = "gs"
    USER_TABLE = "table"


Narrowing = Callable[[Mapping[str, VarDomain]], Mapping[str, VarDomain]]


@dataclass(frozen=True, eq=False)
class ReductionFunction:
    """A contracting, monotonic domain transformer.

    ``narrowing`` is only used by ``USER_TABLE`` functions: it receives the
    read components and returns, for each written variable, the value to
    intersect it with. ``idempotent`` is a declared property (revise is
    idempotent per arc); it is checked by the test-suite, not assumed.
    """

    id: str
    kind: Kind
    reads: frozenset[str]
    writes: frozenset[str]
    priority: int = 1
    constraint: Constraint | None = None
    target: str | None = None
    eps: float | None = None
    narrowing: Narrowing | None = field(default=None, repr=False)
    idempotent: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "reads", frozenset(self.reads))
        object.__setattr__(self, "writes", frozenset(self.writes))
        if not self.writes:
            raise StructuralError(f"function {self.id!r} writes no variable")
        if self.kind is Kind.USER_TABLE and self.narrowing is None:
            raise StructuralError(f"table function {self.id!r} needs a narrowing callable")

    def __call__(self, d: Domain) -> Domain:
        return apply(self, d)

    def __repr__(self) -> str:
        return f"<{self.kind.value} {self.id}>"


def apply(f: ReductionFunction, d: Domain) -> Domain:
    if d.empty:
        return d
    if f.kind is Kind.REVISE:
        return revise(f.constraint.form, f.target, d)
    if f.kind is Kind.HC4_REVISE:
        return hc4_revise(f.constraint.form, d)
    if f.kind is Kind.BOX_NARROW:
        return box_narrow(f.constraint.form, f.target, d, f.eps)
    if f.kind is Kind.GAUSS_SEIDEL:
        return gauss_seidel_sweep(f.constraint.form, d)
    read = {v: d[v] for v in f.reads}
    narrowing = f.narrowing(read)
    return d.narrow({v: narrowing[v] for v in f.writes if v in narrowing})


def reads(f: ReductionFunction) -> frozenset[str]:
    return f.reads


def writes(f: ReductionFunction) -> frozenset[str]:
    return f.writes


# ---------------------------------------------------------------------------
# arc revision


def _finite(d: Domain, name: str) -> FiniteSet:
    dom = d[name]
    if not isinstance(dom, FiniteSet):
        raise KindError(f"revise needs finite-set variables; {name!r} is {type(dom).__name__}")
    return dom


def revise(c: ExtensionalBinary | ArithCmp, target: str, d: Domain) -> Domain:
    """Remove from ``target`` every value without support in the other variable."""
    if d.empty:
        return d
    cvars = c.vars
    if target not in cvars:
        raise StructuralError(f"{target!r} is not a variable of the constraint")
    others = [v for v in cvars if v != target]
    if len(others) > 1:
        raise StructuralError("revise handles unary and binary constraints only")
    tdom = _finite(d, target)

    if isinstance(c, ExtensionalBinary):
        other = others[0]
        odom = _finite(d, other).values
        if target == c.x:
            supported = {a for a, b in c.allowed if b in odom}
        else:
            supported = {b for a, b in c.allowed if a in odom}
        kept = tdom.values & supported
    elif not others:
        kept = {v for v in tdom.values if c.holds({target: v})}
    else:
        other = others[0]
        odom = _finite(d, other).values
        kept = {v for v in tdom.values if any(c.holds({target: v, other: w}) for w in odom)}

    if len(kept) == len(tdom.values):
        return d
    return d.replace({target: fset(kept)})


# ---------------------------------------------------------------------------
# interval evaluation shared by hc4 and box narrowing


def _interval_box(c: ArithCmp, d: Domain) -> dict[str, iv.I]:
    box = {}
    for v in c.vars:
        dom = d[v]
        if not isinstance(dom, Interval):
            raise KindError(f"interval narrowing needs interval variables; {v!r} is {type(dom).__name__}")
        box[v] = (dom.lo, dom.hi)
    return box


def _targets(rel: str, left: iv.I, right: iv.I) -> tuple[iv.MaybeI, iv.MaybeI]:
    """Values the two sides may take for the relation to hold."""
    if rel == "=":
        m = iv.meet(left, right)
        return m, m
    if rel in ("<=", "<"):
        return iv.meet(left, (-iv.INF, right[1])), iv.meet(right, (left[0], iv.INF))
    if rel in (">=", ">"):
        return iv.meet(left, (right[0], iv.INF)), iv.meet(right, (-iv.INF, left[1]))
    return left, right


def _infeasible(c: ArithCmp, box: Mapping[str, iv.I]) -> bool:
    # a full forward/backward pass refutes more slices than forward evaluation
    return _hc4_box(c, box) is None


@dataclass
class _Node:
    value: iv.I
    kids: list[_Node]


def _forward(e: Expr, box: Mapping[str, iv.I]) -> _Node:
    if isinstance(e, Var):
        return _Node(box[e.name], [])
    if isinstance(e, Const):
        return _Node(iv.point(e.value), [])
    if isinstance(e, (Neg, Sqr)):
        a = _forward(e.arg, box)
        return _Node(iv.neg(a.value) if isinstance(e, Neg) else iv.sqr(a.value), [a])
    a = _forward(e.left, box)
    b = _forward(e.right, box)
    op = {Add: iv.add, Sub: iv.sub, Mul: iv.mul}[type(e)]
    return _Node(op(a.value, b.value), [a, b])


def _backward(e: Expr, node: _Node, z: iv.MaybeI, acc: dict[str, iv.I]) -> bool:
    """Project ``z`` (the narrowed value of ``e``) onto the variables.

    Returns False as soon as some projection is empty.
    """
    if z is None:
        return False
    if isinstance(e, Var):
        m = iv.meet(acc[e.name], z)
        if m is None:
            return False
        acc[e.name] = m
        return True
    if isinstance(e, Const):
        return iv.meet(z, iv.point(e.value)) is not None
    if isinstance(e, Neg):
        a = node.kids[0]
        return _backward(e.arg, a, iv.meet(a.value, iv.neg(z)), acc)
    if isinstance(e, Sqr):
        a = node.kids[0]
        return _backward(e.arg, a, iv.sqr_narrow(a.value, z), acc)
    a, b = node.kids
    if isinstance(e, Add):
        za = iv.meet(a.value, iv.sub(z, b.value))
        if za is None:
            return False
        zb = iv.meet(b.value, iv.sub(z, za))
    elif isinstance(e, Sub):
        za = iv.meet(a.value, iv.add(z, b.value))
        if za is None:
            return False
        zb = iv.meet(b.value, iv.sub(za, z))
    else:
        za = iv.div_narrow(a.value, z, b.value)
        if za is None:
            return False
        zb = iv.div_narrow(b.value, z, za)
    return _backward(e.left, a, za, acc) and _backward(e.right, b, zb, acc)


def _write_box(d: Domain, box: Mapping[str, iv.I]) -> Domain:
    return d.narrow({v: Interval(lo, hi) for v, (lo, hi) in box.items()})


def hc4_revise(c: ArithCmp, d: Domain) -> Domain:
    """One forward evaluation and one backward projection over ``c``."""
    if d.empty:
        return d
    box = _interval_box(c, d)
    if c.rel == "!=":
        return d
    acc = _hc4_box(c, box)
    if acc is None:
        return d.bottom()
    return _write_box(d, acc)


def _hc4_box(c: ArithCmp, box: Mapping[str, iv.I]) -> dict[str, iv.I] | None:
    if c.rel == "!=":
        return dict(box)
    left = _forward(c.lhs, box)
    right = _forward(c.rhs, box)
    lt, rt = _targets(c.rel, left.value, right.value)
    acc = dict(box)
    if not (_backward(c.lhs, left, lt, acc) and _backward(c.rhs, right, rt, acc)):
        return None
    return acc


# ---------------------------------------------------------------------------
# box narrowing by bound shaving


def _ordinal(x: float) -> int:
    """Order-preserving map from floats to integers (0.0 and -0.0 coincide)."""
    (bits,) = struct.unpack("<q", struct.pack("<d", x))
    return bits if bits >= 0 else -(bits & 0x7FFFFFFFFFFFFFFF)


def _from_ordinal(n: int) -> float:
    bits = n if n >= 0 else (-n) | -0x8000000000000000
    (x,) = struct.unpack("<d", struct.pack("<q", bits))
    return x


def _grid_step(eps: float) -> float:
    return 2.0 ** math.floor(math.log2(eps))


def _snap(x: float, step: float, upward: bool) -> float:
    if math.ulp(x) >= step:
        return x
    k = x / step
    return (math.ceil(k) if upward else math.floor(k)) * step


def _last_infeasible(lo: float, hi: float, probe: Callable[[float], bool]) -> float | None:
    """Largest float ``g`` in ``[lo, hi)`` with ``probe(g)`` true.

    ``probe`` must be downward closed in ``g``, true nowhere beyond ``hi``.
    """
    if not probe(lo):
        return None
    a, b = _ordinal(lo), _ordinal(hi)
    while b - a > 1:
        m = (a + b) // 2
        if probe(_from_ordinal(m)):
            a = m
        else:
            b = m
    return _from_ordinal(a)


def box_narrow(c: ArithCmp, target: str, d: Domain, eps: float | None) -> Domain:
    """Shave the bounds of ``target`` by discarding provably infeasible slices.

    A slice ``[lo, g]`` is discarded when one hc4 pass over ``c`` with
    ``target`` restricted to the slice (others at their full domains) proves
    infeasibility. The largest such ``g`` is located by bisection over the
    floats and then rounded onto a fixed dyadic grid of step at most ``eps``.
    The grid does not depend on the domain, which keeps the function
    monotonic.
    """
    if eps is None or not eps > 0:
        raise ParameterError(f"box_narrow needs eps > 0, got {eps!r}")
    if d.empty:
        return d
    box = _interval_box(c, d)
    if target not in box:
        raise StructuralError(f"{target!r} is not a variable of the constraint")
    if c.rel == "!=":
        return d
    if _infeasible(c, box):
        return d.bottom()
    lo, hi = box[target]
    step = _grid_step(eps)

    def left_slice(g: float) -> bool:
        return _infeasible(c, {**box, target: (lo, g)})

    def right_slice(g: float) -> bool:
        return _infeasible(c, {**box, target: (g, hi)})

    new_lo, new_hi = lo, hi
    if math.isfinite(lo):
        g = _last_infeasible(lo, hi, left_slice)
        if g is not None:
            new_lo = max(lo, _snap(g, step, upward=False))
    if math.isfinite(hi):
        g = _last_infeasible(-hi, -lo, lambda t: right_slice(-t))
        if g is not None:
            new_hi = min(hi, _snap(-g, step, upward=True))
    if new_lo == lo and new_hi == hi:
        return d
    if new_lo > new_hi:
        # both shaved slices together cover every point of the domain
        return d.bottom()
    return d.replace({target: Interval(new_lo, new_hi)})


# ---------------------------------------------------------------------------
# interval Gauss-Seidel


def gauss_seidel_sweep(s: LinearSystem, d: Domain) -> Domain:
    """One sweep ``x_i := x_i ∩ (b_i - Σ_{j≠i} A_ij x_j) / A_ii`` in order."""
    if d.empty:
        return d
    x = {}
    for v in s.vars:
        dom = d[v]
        if not isinstance(dom, Interval):
            raise KindError(f"Gauss-Seidel needs interval variables; {v!r} is {type(dom).__name__}")
        x[v] = (dom.lo, dom.hi)
    for i, vi in enumerate(s.vars):
        acc = s.rhs[i]
        for j, vj in enumerate(s.vars):
            if j != i and s.matrix[i][j] != (0.0, 0.0):
                acc = iv.sub(acc, iv.mul(s.matrix[i][j], x[vj]))
        m = iv.meet(x[vi], iv.div(acc, s.matrix[i][i]))
        if m is None:
            return d.bottom()
        x[vi] = m
    return _write_box(d, x)


# ---------------------------------------------------------------------------
# constructors


def make_revise(c: Constraint, target: str, priority: int = 1) -> ReductionFunction:
    if not isinstance(c.form, (ExtensionalBinary, ArithCmp)):
        raise KindError("revise applies to extensional or arithmetic constraints")
    return ReductionFunction(
        id=f"{c.id}/{target}",
        kind=Kind.REVISE,
        reads=frozenset(c.vars),
        writes=frozenset([target]),
        priority=priority,
        constraint=c,
        target=target,
        idempotent=True,
    )


def make_hc4(c: Constraint, priority: int = 1) -> ReductionFunction:
    if not isinstance(c.form, ArithCmp):
        raise KindError("hc4_revise applies to arithmetic constraints")
    return ReductionFunction(
        id=f"{c.id}/hc4",
        kind=Kind.HC4_REVISE,
        reads=frozenset(c.vars),
        writes=frozenset(c.vars),
        priority=priority,
        constraint=c,
    )


def make_box(c: Constraint, target: str, eps: float = 1e-9, priority: int = 2) -> ReductionFunction:
    if not isinstance(c.form, ArithCmp):
        raise KindError("box_narrow applies to arithmetic constraints")
    if not eps > 0:
        raise ParameterError(f"box_narrow needs eps > 0, got {eps!r}")
    return ReductionFunction(
        id=f"{c.id}/box/{target}",
        kind=Kind.BOX_NARROW,
        reads=frozenset(c.vars),
        writes=frozenset([target]),
        priority=priority,
        constraint=c,
        target=target,
        eps=eps,
    )


def make_gauss_seidel(c: Constraint, priority: int = 3) -> ReductionFunction:
    if not isinstance(c.form, LinearSystem):
        raise KindError("gauss_seidel_sweep applies to linear systems")
    return ReductionFunction(
        id=f"{c.id}/gs",
        kind=Kind.GAUSS_SEIDEL,
        reads=frozenset(c.vars),
        writes=frozenset(c.vars),
        priority=priority,
        constraint=c,
    )


def table_function(
    id: str,
    reads: Iterable[str],
    writes: Iterable[str],
    narrowing: Narrowing,
    priority: int = 1,
    idempotent: bool = False,
) -> ReductionFunction:
    """A user-defined projection-form function.

    ``narrowing`` maps the read components to the values the written
    components are intersected with. It must be monotonic for the result to
    be a reduction function.
    """
    reads = frozenset(reads)
    writes = frozenset(writes)
    return ReductionFunction(
        id=id,
        kind=Kind.USER_TABLE,
        reads=reads | writes,
        writes=writes,
        priority=priority,
        narrowing=narrowing,
        idempotent=idempotent,
    )


def constant_function(id: str, var: str, value: VarDomain, priority: int = 1) -> ReductionFunction:
    """``x ↦ x ∩ value`` on one variable."""
    return table_function(id, [var], [var], lambda _read: {var: value}, priority, idempotent=True)


def identity_function(id: str, var: str) -> ReductionFunction:
    return table_function(id, [var], [var], lambda read: {var: read[var]}, idempotent=True)


def functions_for(
    constraints: Sequence[Constraint],
    kinds: Mapping[str, str],
    eps: float = 1e-9,
    prune_single_occurrence: bool = True,
) -> list[ReductionFunction]:
    """Decompose constraints into reduction functions.

    ``kinds`` maps variable names to ``"fd"`` or ``"interval"``. Finite-domain
    constraints give one revise per variable; interval arithmetic constraints
    give one hc4 function plus one box function per variable occurring more
    than once (all variables when pruning is off); linear systems give one
    Gauss-Seidel sweep.
    """
    out: list[ReductionFunction] = []
    for c in constraints:
        cvars = c.vars
        fd = all(kinds[v] == "fd" for v in cvars)
        if not fd and any(kinds[v] == "fd" for v in cvars):
            raise KindError(f"constraint {c.id!r} mixes finite-set and interval variables")
        if isinstance(c.form, LinearSystem):
            if fd:
                raise KindError(f"linear system {c.id!r} needs interval variables")
            out.append(make_gauss_seidel(c, c.priority if c.priority is not None else 3))
        elif fd:
            for v in cvars:
                out.append(make_revise(c, v, c.priority if c.priority is not None else 1))
        else:
            if isinstance(c.form, ExtensionalBinary):
                raise KindError(f"table constraint {c.id!r} needs finite-set variables")
            out.append(make_hc4(c, c.priority if c.priority is not None else 1))
            occ = c.form.occurrences()
            for v in cvars:
                if occ[v] > 1 or not prune_single_occurrence:
                    out.append(make_box(c, v, eps, c.priority if c.priority is not None else 2))
    return out
