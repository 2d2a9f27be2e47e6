"""A tiny closed expression language over the chart coordinates ``x`` and ``y``.

Frame components are written as text (``"x*exp(0.2*x*cos(y))"``), parsed
into immutable trees, and differentiated symbolically so every frame has
exact Jacobians and Hessians.

Grammar (whitespace insignificant)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?            # right associative
    atom  := number | "x" | "y" | "(" expr ")" | func "(" expr ")"
    func  := "sin" | "cos" | "tan" | "exp" | "log" | "sqrt"

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnknownIdentifierError

__all__ = [
    "ScalarExpr",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "parse_expr",
    "diff",
    "evaluate",
    "to_text",
    "const",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "func",
    "FUNCTIONS",
    "Program",
    "compile_program",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")
_BINARY = ("add", "sub", "mul", "div", "pow")
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
_NUMPY = {"sin": "np.sin", "cos": "np.cos", "tan": "np.tan", "exp": "np.exp",
          "log": "np.log", "sqrt": "np.sqrt"}


class ScalarExpr:
    """Base class of expression nodes.

    Nodes are frozen dataclasses, so ``==`` is structural equality and
    nodes can be used as dictionary keys.
    """

    __slots__ = ()

    kind: str

    @property
    def children(self) -> Tuple["ScalarExpr", ...]:
        return ()

    def diff(self, var: str) -> "ScalarExpr":
        return diff(self, var)

    def eval(self, x, y):
        """Evaluate at ``(x, y)``; arrays broadcast, scalars return ``float``."""
        return evaluate(self, x, y)

    def __str__(self) -> str:
        return to_text(self)

    @cached_property
    def _numpy_fn(self):
        src = f"lambda x, y: {_numpy_source(self)}"
        return eval(compile(src, "<arsgeo-expr>", "eval"), {"np": np})  # noqa: S307


@dataclass(frozen=True, eq=True)
class Const(ScalarExpr):
    value: float
    kind = "constant"

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("constants must be finite")


@dataclass(frozen=True, eq=True)
class Var(ScalarExpr):
    name: str
    kind = "variable"

    def __post_init__(self):
        if self.name not in ("x", "y"):
            raise ValueError(f"variable must be 'x' or 'y', got {self.name!r}")


@dataclass(frozen=True, eq=True)
class Unary(ScalarExpr):
    op: str  # "neg" or one of FUNCTIONS
    arg: ScalarExpr
    kind = "unary"

    def __post_init__(self):
        if self.op != "neg" and self.op not in FUNCTIONS:
            raise ValueError(f"unknown unary op {self.op!r}")

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=True)
class Binary(ScalarExpr):
    op: str
    left: ScalarExpr
    right: ScalarExpr
    kind = "binary"

    def __post_init__(self):
        if self.op not in _BINARY:
            raise ValueError(f"unknown binary op {self.op!r}")

    @property
    def children(self):
        return (self.left, self.right)


ZERO = Const(0.0)
ONE = Const(1.0)
X = Var("x")
Y = Var("y")


# --------------------------------------------------------------------------
# smart constructors (minimal, deterministic simplification)


def _value(e):
    """Numeric value if ``e`` is a constant or a negated constant, else None."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Unary) and e.op == "neg" and isinstance(e.arg, Const):
        return -e.arg.value
    return None


def const(v: float) -> ScalarExpr:
    # Stored constants are non-negative so that printing round-trips.
    v = float(v)
    if v < 0:
        return Unary("neg", Const(-v))
    return Const(v + 0.0)


def neg(a: ScalarExpr) -> ScalarExpr:
    v = _value(a)
    if v is not None:
        return const(-v)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def add(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    va, vb = _value(a), _value(b)
    if va is not None and vb is not None:
        return const(va + vb)
    if va == 0:
        return b
    if vb == 0:
        return a
    return Binary("add", a, b)


def sub(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    va, vb = _value(a), _value(b)
    if va is not None and vb is not None:
        return const(va - vb)
    if vb == 0:
        return a
    if va == 0:
        return neg(b)
    return Binary("sub", a, b)


def mul(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    va, vb = _value(a), _value(b)
    if va is not None and vb is not None:
        return const(va * vb)
    if va == 0 or vb == 0:
        return ZERO
    if va == 1:
        return b
    if vb == 1:
        return a
    if va == -1:
        return neg(b)
    if vb == -1:
        return neg(a)
    return Binary("mul", a, b)


def div(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    va, vb = _value(a), _value(b)
    if va is not None and vb is not None and vb != 0:
        return const(va / vb)
    if va == 0 and vb != 0:
        return ZERO
    if vb == 1:
        return a
    return Binary("div", a, b)


def power(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    vb = _value(b)
    if vb == 1:
        return a
    if vb == 0:
        return ONE
    return Binary("pow", a, b)


def func(name: str, a: ScalarExpr) -> ScalarExpr:
    return Unary(name, a)


# --------------------------------------------------------------------------
# printing


def to_text(e: ScalarExpr) -> str:
    """Fully parenthesised text that parses back to a structurally equal tree."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_text(e.arg)})"
        return f"{e.op}({to_text(e.arg)})"
    return f"({to_text(e.left)} {_SYMBOL[e.op]} {to_text(e.right)})"


def _numpy_source(e: ScalarExpr) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{_numpy_source(e.arg)})"
        return f"{_NUMPY[e.op]}({_numpy_source(e.arg)})"
    a, b = _numpy_source(e.left), _numpy_source(e.right)
    if e.op == "pow":
        return f"np.power({a}, {b})"
    return f"({a} {_SYMBOL[e.op]} {b})"


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(text, start)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(text, n)))
    return tokens


def _byte_offset(text, index):
    return len(text[:index].encode("utf-8"))


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, off = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", off)

    def parse(self):
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", off)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary("add" if op == "+" else "sub", e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary("mul" if op == "*" else "div", e, self.unary())
        return e

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("pow", base, self.unary())
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "ident":
            if val in ("x", "y"):
                return Var(val)
            if val in FUNCTIONS:
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return Unary(val, inner)
            raise UnknownIdentifierError(val, off)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", off)


def parse_expr(text: str) -> ScalarExpr:
    """Parse ``text`` into an expression tree.

    Raises
    ------
    ExprSyntaxError
        On malformed input; ``.offset`` is the byte offset of the problem.
    UnknownIdentifierError
        On a name other than ``x``, ``y`` or a supported function.
    """
    return _Parser(text).parse()


def as_expr(e) -> ScalarExpr:
    """Accept an expression, its text, or a number."""
    if isinstance(e, ScalarExpr):
        return e
    if isinstance(e, str):
        return parse_expr(e)
    if isinstance(e, (int, float)):
        return const(e)
    raise TypeError(f"cannot interpret {e!r} as an expression")


# --------------------------------------------------------------------------
# differentiation

_DIFF_CACHE: dict = {}


def diff(e: ScalarExpr, var: str) -> ScalarExpr:
    """Exact symbolic partial derivative of ``e`` with respect to ``var``."""
    if var not in ("x", "y"):
        raise ValueError(f"can only differentiate by 'x' or 'y', not {var!r}")
    key = (e, var)
    hit = _DIFF_CACHE.get(key)
    if hit is None:
        hit = _diff(e, var)
        _DIFF_CACHE[key] = hit
    return hit


def _diff(e, var):
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Unary):
        u = e.arg
        du = diff(u, var)
        if _value(du) == 0:
            return ZERO
        if e.op == "neg":
            return neg(du)
        if e.op == "sin":
            return mul(func("cos", u), du)
        if e.op == "cos":
            return neg(mul(func("sin", u), du))
        if e.op == "tan":
            return div(du, power(func("cos", u), Const(2.0)))
        if e.op == "exp":
            return mul(e, du)
        if e.op == "log":
            return div(du, u)
        if e.op == "sqrt":
            return div(du, mul(Const(2.0), e))
        raise AssertionError(e.op)
    u, v = e.left, e.right
    du, dv = diff(u, var), diff(v, var)
    if e.op == "add":
        return add(du, dv)
    if e.op == "sub":
        return sub(du, dv)
    if e.op == "mul":
        return add(mul(du, v), mul(u, dv))
    if e.op == "div":
        if _value(dv) == 0:
            return div(du, v)
        return div(sub(mul(du, v), mul(u, dv)), power(v, Const(2.0)))
    # pow
    c = _value(v)
    if c is not None:
        return mul(mul(const(c), power(u, const(c - 1.0))), du)
    # u^v = exp(v log u); base must be positive where evaluated
    return mul(e, add(mul(dv, func("log", u)), div(mul(v, du), u)))


# --------------------------------------------------------------------------
# evaluation


def evaluate(e: ScalarExpr, x, y):
    """IEEE double evaluation; domain violations raise :class:`DomainError`.

    Scalars in give a Python float out; arrays broadcast against each other.
    """
    scalar = np.ndim(x) == 0 and np.ndim(y) == 0
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    try:
        with np.errstate(divide="raise", invalid="raise", over="raise", under="ignore"):
            r = e._numpy_fn(xa, ya)
    except (FloatingPointError, ZeroDivisionError, OverflowError) as exc:
        raise DomainError(f"cannot evaluate {to_text(e)}: {exc}") from None
    if scalar:
        return float(r)
    shape = np.broadcast(xa, ya).shape
    return np.array(np.broadcast_to(r, shape), dtype=float)


# --------------------------------------------------------------------------
# flat postfix programs for the compiled integrator

OP_CONST, OP_X, OP_Y, OP_NEG = 0, 1, 2, 3
_UNARY_CODES = {"sin": 4, "cos": 5, "tan": 6, "exp": 7, "log": 8, "sqrt": 9}
_BINARY_CODES = {"add": 10, "sub": 11, "mul": 12, "div": 13, "pow": 14}


@dataclass(frozen=True)
class Program:
    """Several expressions flattened into one postfix instruction stream.

    Expression ``k`` occupies ``ops[starts[k]:starts[k+1]]``; ``OP_CONST``
    instructions index ``consts`` through ``args``.
    """

    ops: np.ndarray
    args: np.ndarray
    consts: np.ndarray
    starts: np.ndarray
    stack_size: int


def compile_program(exprs) -> Program:
    ops, args, consts, starts = [], [], [], [0]
    depth = 0

    def emit(e, d):
        nonlocal depth
        if isinstance(e, Const):
            ops.append(OP_CONST)
            args.append(len(consts))
            consts.append(e.value)
            depth = max(depth, d + 1)
            return
        if isinstance(e, Var):
            ops.append(OP_X if e.name == "x" else OP_Y)
            args.append(0)
            depth = max(depth, d + 1)
            return
        if isinstance(e, Unary):
            emit(e.arg, d)
            ops.append(OP_NEG if e.op == "neg" else _UNARY_CODES[e.op])
            args.append(0)
            return
        emit(e.left, d)
        emit(e.right, d + 1)
        ops.append(_BINARY_CODES[e.op])
        args.append(0)

    for e in exprs:
        emit(e, 0)
        starts.append(len(ops))
    return Program(
        ops=np.asarray(ops, dtype=np.int64),
        args=np.asarray(args, dtype=np.int64),
        consts=np.asarray(consts if consts else [0.0], dtype=float),
        starts=np.asarray(starts, dtype=np.int64),
        stack_size=max(depth, 1) + 1,
    )
