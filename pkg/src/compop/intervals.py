"""Outward-rounded interval arithmetic on ``(lo, hi)`` float pairs.

Bounds are rounded in the outward direction: a lower bound is the largest
float not above the real bound, an upper bound the smallest float not below
it. The rounding error of each operation is recovered exactly (TwoSum,
Veltkamp/Dekker products, or ``fractions.Fraction`` outside the safe
exponent range), so an exact result is never widened and every bound
function is monotone. ``None`` stands for the empty set.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional, Tuple

from .lattice import EMPTY, Interval, VarDomain

I = Tuple[float, float]
MaybeI = Optional[I]

INF = math.inf
ENTIRE: I = (-INF, INF)
MAX_FLOAT = 1.7976931348623157e308

_SPLIT = 134217729.0  # 2**27 + 1
_BIG = 2.0**900
_SMALL = 2.0**-900


def down(x: float) -> float:
    return math.nextafter(x, -INF)


def up(x: float) -> float:
    return math.nextafter(x, INF)


def _directed(s: float, err: int, upward: bool) -> float:
    """Round the real value ``s + ε`` (sign(ε) = err) in the given direction."""
    if upward:
        return up(s) if err > 0 else s
    return down(s) if err < 0 else s


def _overflow(s: float, upward: bool) -> float:
    # s is ±inf produced from finite operands: the real result is finite
    if s > 0:
        return INF if upward else MAX_FLOAT
    return -MAX_FLOAT if upward else -INF


def _sign(x: float | Fraction) -> int:
    return (x > 0) - (x < 0)


def _exact_round(exact: Fraction, upward: bool) -> float:
    try:
        s = float(exact)
    except OverflowError:
        return _overflow(INF if exact > 0 else -INF, upward)
    if math.isinf(s):
        return _overflow(s, upward)
    return _directed(s, _sign(exact - Fraction(s)), upward)


def _two_prod_err(a: float, b: float, p: float) -> float:
    c = _SPLIT * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLIT * b
    bh = c - (c - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _safe(*xs: float) -> bool:
    # zero here is an underflow: callers handle exact zero operands first
    return all(_SMALL < abs(x) < _BIG for x in xs)


def add_r(a: float, b: float, upward: bool) -> float:
    s = a + b
    if math.isinf(a) or math.isinf(b):
        return s
    if math.isinf(s):
        return _overflow(s, upward)
    if max(abs(a), abs(b), abs(s)) >= _BIG:
        # TwoSum's intermediate differences may overflow near the top
        return _exact_round(Fraction(a) + Fraction(b), upward)
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return _directed(s, _sign(err), upward)


def mul_r(a: float, b: float, upward: bool) -> float:
    if a == 0.0 or b == 0.0:
        # 0 * inf: the real factor is finite, so the product is 0
        return 0.0
    p = a * b
    if math.isinf(a) or math.isinf(b):
        return p
    if math.isinf(p):
        return _overflow(p, upward)
    if _safe(a, b, p):
        return _directed(p, _sign(_two_prod_err(a, b, p)), upward)
    return _exact_round(Fraction(a) * Fraction(b), upward)


def div_r(a: float, b: float, upward: bool) -> float:
    """``a / b`` for ``b != 0``; may return NaN for ``inf / inf``."""
    if a == 0.0:
        return 0.0
    q = a / b
    if math.isinf(a) or math.isinf(b) or math.isnan(q):
        return q
    if math.isinf(q):
        return _overflow(q, upward)
    if _safe(a, b, q):
        p = q * b
        if _safe(p):
            # a - p is exact (Sterbenz); a/b - q has the sign of r / b
            r = (a - p) - _two_prod_err(q, b, p)
            return _directed(q, _sign(r) * _sign(b), upward)
    return _exact_round(Fraction(a) / Fraction(b), upward)


def sqrt_r(a: float, upward: bool) -> float:
    if a <= 0.0 or math.isinf(a):
        return math.sqrt(max(a, 0.0))
    s = math.sqrt(a)
    if _safe(a, s):
        p = s * s
        if _safe(p):
            r = (a - p) - _two_prod_err(s, s, p)
            return _directed(s, _sign(r), upward)
    # bisect the exact comparison s*s vs a
    fa = Fraction(a)
    err = _sign(fa - Fraction(s) ** 2)
    return _directed(s, err, upward)


def to_pair(d: VarDomain) -> MaybeI:
    if d is EMPTY:
        return None
    assert isinstance(d, Interval)
    return (d.lo, d.hi)


def to_domain(p: MaybeI) -> VarDomain:
    if p is None:
        return EMPTY
    return Interval(p[0], p[1])


def point(c: float) -> I:
    c = float(c)
    return (c, c)


def meet(a: MaybeI, b: MaybeI) -> MaybeI:
    if a is None or b is None:
        return None
    lo = max(a[0], b[0])
    hi = min(a[1], b[1])
    if lo > hi:
        return None
    return (lo, hi)


def hull(a: MaybeI, b: MaybeI) -> MaybeI:
    if a is None:
        return b
    if b is None:
        return a
    return (min(a[0], b[0]), max(a[1], b[1]))


def contains_zero(a: I) -> bool:
    return a[0] <= 0.0 <= a[1]


def add(a: I, b: I) -> I:
    return (add_r(a[0], b[0], False), add_r(a[1], b[1], True))


def sub(a: I, b: I) -> I:
    return (add_r(a[0], -b[1], False), add_r(a[1], -b[0], True))


def neg(a: I) -> I:
    return (-a[1], -a[0])


def mul(a: I, b: I) -> I:
    pairs = ((a[0], b[0]), (a[0], b[1]), (a[1], b[0]), (a[1], b[1]))
    lo = min(mul_r(x, y, False) for x, y in pairs)
    hi = max(mul_r(x, y, True) for x, y in pairs)
    return (lo, hi)


def sqr(a: I) -> I:
    lo, hi = a
    if lo >= 0.0:
        return (mul_r(lo, lo, False), mul_r(hi, hi, True))
    if hi <= 0.0:
        return (mul_r(hi, hi, False), mul_r(lo, lo, True))
    return (0.0, max(mul_r(lo, lo, True), mul_r(hi, hi, True)))


def div(a: I, b: I) -> I:
    """``a / b`` for a divisor that excludes zero."""
    if contains_zero(b):
        raise ZeroDivisionError("divisor interval contains zero")
    pairs = ((a[0], b[0]), (a[0], b[1]), (a[1], b[0]), (a[1], b[1]))
    los = [div_r(x, y, False) for x, y in pairs]
    his = [div_r(x, y, True) for x, y in pairs]
    if any(math.isnan(q) for q in los + his):
        return ENTIRE
    return (min(los), max(his))


def div_narrow(x: I, z: I, b: I) -> MaybeI:
    """Narrow ``x`` to the hull of ``x ∩ {z/b}`` under ``x * b = z``.

    Zero inside the divisor splits the quotient set into two half-lines;
    each is intersected with ``x`` before taking the hull.
    """
    if not contains_zero(b):
        return meet(x, div(z, b))
    if contains_zero(z):
        return x
    if b[0] == 0.0 and b[1] == 0.0:
        return None
    pieces: list[I] = []
    if z[0] > 0.0:
        if b[1] > 0.0:
            pieces.append((div_r(z[0], b[1], False), INF))
        if b[0] < 0.0:
            pieces.append((-INF, div_r(z[0], b[0], True)))
    else:
        if b[1] > 0.0:
            pieces.append((-INF, div_r(z[1], b[1], True)))
        if b[0] < 0.0:
            pieces.append((div_r(z[1], b[0], False), INF))
    out: MaybeI = None
    for lo, hi in pieces:
        if math.isnan(lo) or math.isnan(hi):
            return x
        out = hull(out, meet(x, (lo, hi)))
    return out


def sqr_narrow(x: I, z: I) -> MaybeI:
    """Narrow ``x`` under ``x**2 = z``."""
    z = meet(z, (0.0, INF))
    if z is None:
        return None
    rlo = sqrt_r(z[0], False)
    rhi = sqrt_r(z[1], True)
    return hull(meet(x, (rlo, rhi)), meet(x, (-rhi, -rlo)))
