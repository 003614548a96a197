"""Line-oriented instance files.

::

    kind fd
    var x set {1,2,3}
    var y set 1..3
    con c1 rel x < y prio 2
    con c2 table x y {(1,2),(2,3)}

    kind interval
    var x interval [0, 10]
    con c expr x*x + y = 2
    con s linear x y : 1 -0.5 = 0 ; -0.5 [0.9,1.1] = [0,0.1]

``#`` starts a comment.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import CompopError, ParseError
from .expr import Var, parse_expr
from .expr import render as render_expr
from .functions import ArithCmp, Constraint, ExtensionalBinary, LinearSystem, ReductionFunction, functions_for
from .lattice import Domain, FiniteSet, Interval, VarDomain

_REL_ALIASES = {"<": "<", "<=": "<=", "≤": "<=", "=": "=", "==": "=", "!=": "!=", "≠": "!=", ">": ">", ">=": ">=", "≥": ">="}
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_CON_ID = re.compile(r"[^\s(),]+$")
_PRIO = re.compile(r"\s+prio\s+(-?\d+)\s*$")
_EXPR_REL = re.compile(r"<=|>=|=")
_NUM = r"[-+]?(?:inf|\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
_ENTRY = re.compile(rf"\[\s*({_NUM})\s*,\s*({_NUM})\s*\]|({_NUM})")


@dataclass
class Instance:
    kind: str
    variables: dict[str, VarDomain] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)

    def domain(self) -> Domain:
        return Domain.from_dict(self.variables)

    def kinds(self) -> dict[str, str]:
        return {v: self.kind for v in self.variables}

    def functions(self, eps: float = 1e-9, prune: bool = True) -> list[ReductionFunction]:
        return functions_for(self.constraints, self.kinds(), eps, prune)

    def render(self) -> str:
        lines = [f"kind {self.kind}"]
        for name, dom in self.variables.items():
            if isinstance(dom, FiniteSet):
                lines.append(f"var {name} set {{{','.join(map(str, dom.sorted()))}}}")
            else:
                lines.append(f"var {name} interval [{_num(dom.lo)}, {_num(dom.hi)}]")
        for c in self.constraints:
            lines.append(f"con {c.id} {_render_form(c.form)}" + (f" prio {c.priority}" if c.priority is not None else ""))
        return "\n".join(lines) + "\n"


def _num(x: float) -> str:
    return "%.17g" % x


def _entry(lo: float, hi: float) -> str:
    return _num(lo) if lo == hi else f"[{_num(lo)},{_num(hi)}]"


def _render_form(form) -> str:
    if isinstance(form, ExtensionalBinary):
        pairs = ",".join(f"({a},{b})" for a, b in sorted(form.allowed))
        return f"table {form.x} {form.y} {{{pairs}}}"
    if isinstance(form, LinearSystem):
        rows = " ; ".join(
            " ".join(_entry(*a) for a in row) + " = " + _entry(*b) for row, b in zip(form.matrix, form.rhs)
        )
        return f"linear {' '.join(form.vars)} : {rows}"
    if isinstance(form.lhs, Var) and isinstance(form.rhs, Var) and form.rel in ("<", "<=", "=", "!=", ">", ">="):
        return f"rel {form.lhs.name} {form.rel} {form.rhs.name}"
    return f"expr {render_expr(form.lhs)} {form.rel} {render_expr(form.rhs)}"


class _Line:
    """Cursor over one source line for error positions."""

    def __init__(self, text: str, number: int):
        self.text = text
        self.number = number
        self.pos = 0

    def error(self, msg: str, col: int | None = None) -> ParseError:
        return ParseError(msg, self.number, (self.pos if col is None else col) + 1)

    def word(self, what: str) -> str:
        m = re.compile(r"\s*(\S+)").match(self.text, self.pos)
        if not m:
            raise self.error(f"expected {what}")
        self.pos = m.end()
        return m.group(1)

    def rest(self) -> tuple[str, int]:
        start = self.pos
        while start < len(self.text) and self.text[start].isspace():
            start += 1
        self.pos = len(self.text)
        return self.text[start:], start


def parse_instance(text: str) -> Instance:
    kind = None
    variables: dict[str, VarDomain] = {}
    constraints: list[Constraint] = []
    ids: set[str] = set()
    for number, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        ln = _Line(body, number)
        keyword = ln.word("a keyword")
        if keyword == "kind":
            if kind is not None:
                raise ln.error("kind declared twice", 0)
            kind = ln.word("fd or interval")
            if kind not in ("fd", "interval"):
                raise ln.error(f"unknown kind {kind!r}; expected fd or interval", ln.pos - len(kind))
            _expect_end(ln)
        elif keyword == "var":
            if kind is None:
                raise ln.error("var before kind declaration", 0)
            name = ln.word("a variable name")
            if not _NAME.match(name):
                raise ln.error(f"invalid variable name {name!r}", ln.pos - len(name))
            if name in variables:
                raise ln.error(f"duplicate variable {name!r}", ln.pos - len(name))
            variables[name] = _parse_var(ln, kind)
        elif keyword == "con":
            if kind is None:
                raise ln.error("con before kind declaration", 0)
            cid = ln.word("a constraint id")
            if not _CON_ID.match(cid):
                raise ln.error(f"invalid constraint id {cid!r}", ln.pos - len(cid))
            if cid in ids:
                raise ln.error(f"duplicate constraint id {cid!r}", ln.pos - len(cid))
            ids.add(cid)
            constraints.append(_parse_con(ln, cid, kind, variables))
        else:
            raise ln.error(f"unknown keyword {keyword!r}", ln.pos - len(keyword))
    if kind is None:
        raise ParseError("missing kind declaration")
    return Instance(kind, variables, constraints)


def _expect_end(ln: _Line) -> None:
    rest, col = ln.rest()
    if rest:
        raise ln.error(f"unexpected {rest!r}", col)


def _parse_var(ln: _Line, kind: str) -> VarDomain:
    dkind = ln.word("set or interval")
    rest, col = ln.rest()
    if dkind == "set":
        if kind != "fd":
            raise ln.error("set variable in an interval instance", col)
        m = re.fullmatch(r"\{\s*(-?\d+(?:\s*,\s*-?\d+)*)?\s*\}", rest)
        if m:
            values = [int(v) for v in re.findall(r"-?\d+", m.group(1) or "")]
        else:
            m = re.fullmatch(r"(-?\d+)\s*\.\.\s*(-?\d+)", rest)
            if not m:
                raise ln.error("expected {v1,v2,...} or a..b", col)
            values = list(range(int(m.group(1)), int(m.group(2)) + 1))
        if not values:
            raise ln.error("empty set domain", col)
        return FiniteSet(frozenset(values))
    if dkind == "interval":
        if kind != "interval":
            raise ln.error("interval variable in an fd instance", col)
        m = re.fullmatch(rf"\[\s*({_NUM})\s*,\s*({_NUM})\s*\]", rest)
        if not m:
            raise ln.error("expected [lo,hi]", col)
        try:
            return Interval(float(m.group(1)), float(m.group(2)))
        except (CompopError, ValueError) as exc:
            raise ln.error(str(exc), col) from None
    raise ln.error(f"unknown domain kind {dkind!r}", ln.pos - len(dkind))


def _parse_con(ln: _Line, cid: str, kind: str, variables: dict[str, VarDomain]) -> Constraint:
    prio = None
    m = _PRIO.search(ln.text)
    if m:
        prio = int(m.group(1))
        ln.text = ln.text[: m.start()]
    form_kind = ln.word("rel, table, expr or linear")

    def known(name: str, col: int) -> str:
        if name not in variables:
            raise ln.error(f"undeclared variable {name!r}", col)
        return name

    if form_kind == "rel":
        if kind != "fd":
            raise ln.error("rel constraints need an fd instance", 0)
        x = known(ln.word("a variable"), ln.pos)
        op = ln.word("a relation")
        if op not in _REL_ALIASES:
            raise ln.error(f"unknown relation {op!r}", ln.pos - len(op))
        y = known(ln.word("a variable"), ln.pos)
        _expect_end(ln)
        form = ArithCmp(Var(x), _REL_ALIASES[op], Var(y))
    elif form_kind == "table":
        if kind != "fd":
            raise ln.error("table constraints need an fd instance", 0)
        x = known(ln.word("a variable"), ln.pos)
        y = known(ln.word("a variable"), ln.pos)
        rest, col = ln.rest()
        if not re.fullmatch(r"\{\s*(\(\s*-?\d+\s*,\s*-?\d+\s*\)\s*(,\s*)?)*\}", rest):
            raise ln.error("expected {(a,b),...}", col)
        pairs = frozenset((int(a), int(b)) for a, b in re.findall(r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)", rest))
        form = ExtensionalBinary(x, y, pairs)
    elif form_kind == "expr":
        rest, col = ln.rest()
        m = _EXPR_REL.search(rest)
        if not m:
            raise ln.error("expected a relation =, <= or >=", col)
        lhs = parse_expr(rest[: m.start()], ln.number, col)
        rhs = parse_expr(rest[m.end() :], ln.number, col + m.end())
        form = ArithCmp(lhs, m.group(0), rhs)
        for v in form.vars:
            known(v, col)
        if kind == "fd" and len(form.vars) > 2:
            raise ln.error("fd expressions may use at most two variables", col)
    elif form_kind == "linear":
        form = _parse_linear(ln, kind, known)
    else:
        raise ln.error(f"unknown constraint form {form_kind!r}", ln.pos - len(form_kind))
    return Constraint(cid, form, prio)


def _parse_linear(ln: _Line, kind: str, known) -> LinearSystem:
    if kind != "interval":
        raise ln.error("linear systems need an interval instance", 0)
    rest, col = ln.rest()
    if ":" not in rest:
        raise ln.error("expected ':' after the variable list", col)
    head, body = rest.split(":", 1)
    names = head.split()
    if not names:
        raise ln.error("linear system without variables", col)
    for name in names:
        known(name, col + head.index(name))
    body_col = col + len(head) + 1
    matrix, rhs = [], []
    for row_text in body.split(";"):
        if "=" not in row_text:
            raise ln.error("linear row without '='", body_col)
        left, right = row_text.split("=", 1)
        row = _entries(left, ln, body_col)
        b = _entries(right, ln, body_col + len(left) + 1)
        if len(row) != len(names) or len(b) != 1:
            raise ln.error(f"linear row needs {len(names)} coefficients and one right-hand side", body_col)
        matrix.append(tuple(row))
        rhs.append(b[0])
        body_col += len(row_text) + 1
    try:
        return LinearSystem(tuple(names), tuple(matrix), tuple(rhs))
    except CompopError as exc:
        raise ln.error(str(exc), col) from None


def _entries(text: str, ln: _Line, col: int) -> list[tuple[float, float]]:
    out = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            return out
        m = _ENTRY.match(text, pos)
        if not m:
            raise ln.error(f"invalid coefficient {text[pos:].split()[0]!r}", col + pos)
        if m.group(3) is not None:
            v = float(m.group(3))
            out.append((v, v))
        else:
            lo, hi = float(m.group(1)), float(m.group(2))
            if lo > hi or math.isnan(lo) or math.isnan(hi):
                raise ln.error(f"invalid interval [{lo}, {hi}]", col + pos)
            out.append((lo, hi))
        pos = m.end()
