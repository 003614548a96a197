"""Arithmetic expression trees over +, -, *, unary minus, square and constants."""

from __future__ import annotations

import ast
from collections import Counter
from dataclasses import dataclass
from typing import Union

from .errors import ParseError


@dataclass(frozen=True)
class Const:
    value: float | int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Add:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg:
    arg: Expr


@dataclass(frozen=True)
class Sqr:
    arg: Expr


Expr = Union[Const, Var, Add, Sub, Mul, Neg, Sqr]

_BINARY = {Add: "+", Sub: "-", Mul: "*"}
_PREC = {Add: 1, Sub: 1, Mul: 2}


def occurrences(e: Expr) -> Counter[str]:
    """Number of times each variable occurs in ``e``."""
    counts: Counter[str] = Counter()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            counts[n.name] += 1
        elif isinstance(n, (Add, Sub, Mul)):
            stack.append(n.left)
            stack.append(n.right)
        elif isinstance(n, (Neg, Sqr)):
            stack.append(n.arg)
    return counts


def variables(e: Expr) -> list[str]:
    """Variables of ``e`` in order of first occurrence (left to right)."""
    seen: dict[str, None] = {}

    def walk(n: Expr) -> None:
        if isinstance(n, Var):
            seen.setdefault(n.name)
        elif isinstance(n, (Add, Sub, Mul)):
            walk(n.left)
            walk(n.right)
        elif isinstance(n, (Neg, Sqr)):
            walk(n.arg)

    walk(e)
    return list(seen)


def evaluate(e: Expr, env: dict[str, float | int]) -> float | int:
    """Point evaluation (exact for integers, IEEE for floats)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Add):
        return evaluate(e.left, env) + evaluate(e.right, env)
    if isinstance(e, Sub):
        return evaluate(e.left, env) - evaluate(e.right, env)
    if isinstance(e, Mul):
        return evaluate(e.left, env) * evaluate(e.right, env)
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Sqr):
        v = evaluate(e.arg, env)
        return v * v
    raise TypeError(f"not an expression node: {e!r}")


def render(e: Expr, parent_prec: int = 0, right_operand: bool = False) -> str:
    """Render with the minimum parentheses needed to re-parse to ``e``."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + render(e.arg, 3)
    if isinstance(e, Sqr):
        return f"sqr({render(e.arg)})"
    prec = _PREC[type(e)]
    text = f"{render(e.left, prec)} {_BINARY[type(e)]} {render(e.right, prec, True)}"
    # left-associative operators need parentheses on an equal-precedence right operand
    if prec < parent_prec or (prec == parent_prec and right_operand):
        return f"({text})"
    return text


def parse_expr(text: str, line: int | None = None, col_offset: int = 0) -> Expr:
    """Parse an arithmetic expression.

    Accepts ``+ - *``, unary minus, ``x^2`` / ``x**2`` / ``sqr(x)``, integer
    and float literals, ``inf``, and identifiers. ``line`` and ``col_offset``
    locate ``text`` inside a larger file for error messages.
    """
    src = text.replace("^", "**")
    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as exc:
        col = (exc.offset or 1) + col_offset
        raise ParseError(f"invalid expression {text.strip()!r}", line, col) from None
    return _convert(tree.body, line, col_offset)


def _convert(node: ast.AST, line: int | None, off: int) -> Expr:
    def fail(msg: str) -> ParseError:
        return ParseError(msg, line, getattr(node, "col_offset", 0) + 1 + off)

    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise fail(f"unsupported literal {node.value!r}")
        return Const(node.value)
    if isinstance(node, ast.Name):
        if node.id == "inf":
            return Const(float("inf"))
        return Var(node.id)
    if isinstance(node, ast.UnaryOp):
        arg = _convert(node.operand, line, off)
        if isinstance(node.op, ast.USub):
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Neg(arg)
        if isinstance(node.op, ast.UAdd):
            return arg
        raise fail("unsupported unary operator")
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            if not (isinstance(node.right, ast.Constant) and node.right.value == 2):
                raise fail("only squaring (exponent 2) is supported")
            return Sqr(_convert(node.left, line, off))
        ops = {ast.Add: Add, ast.Sub: Sub, ast.Mult: Mul}
        cls = ops.get(type(node.op))
        if cls is None:
            raise fail("unsupported binary operator")
        return cls(_convert(node.left, line, off), _convert(node.right, line, off))
    if isinstance(node, ast.Call):
        if isinstance(node.func, ast.Name) and node.func.id == "sqr" and len(node.args) == 1 and not node.keywords:
            return Sqr(_convert(node.args[0], line, off))
        raise fail("unsupported function call (only sqr(e) is allowed)")
    raise fail(f"unsupported syntax {type(node).__name__}")
