"""Small expression language for decision-dependent parameters and costs.

Expressions are infix arithmetic over decision variables x1..xn and scenario
components xi1..xid, with +, -, *, /, ^ (also **), unary minus and the
functions exp, log, sqrt, abs.  Parsed trees are immutable and evaluation is
pure, so expressions can be shared freely.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import (
    ExprDomainError,
    ExprIndexError,
    ExprNameError,
    ExprSyntaxError,
)

_FUNCTIONS = ("exp", "log", "sqrt", "abs", "neg")

_TOKEN_RE = re.compile(
    r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z]+\d*)
  | (?P<op>\*\*|[-+*/^()])
  | (?P<ws>\s+)
""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(compare=False, default=0)


@dataclass(frozen=True)
class Var:
    kind: str  # "x" (decision) or "xi" (scenario)
    index: int  # 0-based
    pos: int = field(compare=False, default=0)


@dataclass(frozen=True)
class Unary:
    op: str  # neg, exp, log, sqrt, abs
    arg: "Expr"
    pos: int = field(compare=False, default=0)


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / ^
    left: "Expr"
    right: "Expr"
    pos: int = field(compare=False, default=0)


Expr = Num | Var | Unary | Binary


def _tokenize(text):
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character '{text[i]}'", i)
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group()), i))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group(), i))
        elif m.lastgroup == "op":
            tokens.append(("op", m.group(), i))
        i = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    """Precedence-climbing parser.  ^ binds tightest and associates right;
    unary minus sits between ^ and the multiplicative level."""

    def __init__(self, tokens, n, d):
        self.tokens = tokens
        self.k = 0
        self.n = n
        self.d = d

    def peek(self):
        return self.tokens[self.k]

    def next(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected '{op}'", pos)

    def parse_expression(self):
        node = self.parse_term()
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.parse_term()
                node = Binary(val, node, rhs, pos)
            else:
                return node

    def parse_term(self):
        node = self.parse_unary()
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.parse_unary()
                node = Binary(val, node, rhs, pos)
            else:
                return node

    def parse_unary(self):
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Unary("neg", self.parse_unary(), pos)
        if kind == "op" and val == "+":
            self.next()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        kind, val, pos = self.peek()
        if kind == "op" and val in ("^", "**"):
            self.next()
            # right associative; exponent may carry its own unary minus
            exponent = self.parse_unary_power()
            return Binary("^", base, exponent, pos)
        return base

    def parse_unary_power(self):
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Unary("neg", self.parse_unary_power(), pos)
        return self.parse_power()

    def parse_atom(self):
        kind, val, pos = self.next()
        if kind == "num":
            return Num(val, pos)
        if kind == "op" and val == "(":
            node = self.parse_expression()
            self.expect_op(")")
            return node
        if kind == "name":
            return self.parse_name(val, pos)
        raise ExprSyntaxError(f"unexpected token '{val}'" if val else "unexpected end of input", pos)

    def parse_name(self, name, pos):
        m = re.fullmatch(r"([A-Za-z]+)(\d*)", name)
        letters, digits = m.group(1), m.group(2)
        if letters in ("exp", "log", "sqrt", "abs") and not digits:
            self.expect_op("(")
            arg = self.parse_expression()
            self.expect_op(")")
            return Unary(letters, arg, pos)
        if letters == "xi":
            if not digits:
                raise ExprNameError(name, pos)
            idx = int(digits)
            if not 1 <= idx <= self.d:
                raise ExprIndexError("xi", idx, self.d, pos)
            return Var("xi", idx - 1, pos)
        if letters == "x":
            if not digits:
                raise ExprNameError(name, pos)
            idx = int(digits)
            if not 1 <= idx <= self.n:
                raise ExprIndexError("x", idx, self.n, pos)
            return Var("x", idx - 1, pos)
        raise ExprNameError(name, pos)


def parse(text, n, d=0):
    """Parse `text` against decision dimension `n` and scenario dimension `d`.

    Raises ExprSyntaxError / ExprNameError / ExprIndexError with the 0-based
    offset of the offending token.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    parser = _Parser(_tokenize(text), n, d)
    node = parser.parse_expression()
    kind, val, pos = parser.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected token '{val}'", pos)
    return node


def evaluate(e, x=(), xi=()):
    """Evaluate `e` at decision vector x and scenario vector xi.

    Evaluation order is fixed (left subtree first), so results are
    reproducible bit-for-bit on a given platform.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(x[e.index]) if e.kind == "x" else float(xi[e.index])
    if isinstance(e, Unary):
        v = evaluate(e.arg, x, xi)
        if e.op == "neg":
            return -v
        if e.op == "exp":
            return math.exp(v)
        if e.op == "log":
            if v <= 0.0:
                raise ExprDomainError(f"log of non-positive value {v!r}", e.pos)
            return math.log(v)
        if e.op == "sqrt":
            if v < 0.0:
                raise ExprDomainError(f"sqrt of negative value {v!r}", e.pos)
            return math.sqrt(v)
        if e.op == "abs":
            return abs(v)
        raise AssertionError(e.op)
    if isinstance(e, Binary):
        a = evaluate(e.left, x, xi)
        b = evaluate(e.right, x, xi)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0.0:
                raise ExprDomainError("division by zero", e.pos)
            return a / b
        if e.op == "^":
            try:
                r = a**b
            except (ValueError, OverflowError, ZeroDivisionError) as exc:
                raise ExprDomainError(f"pow domain error: {exc}", e.pos) from None
            if isinstance(r, complex):
                raise ExprDomainError(
                    f"pow of negative base {a!r} to fractional exponent {b!r}", e.pos
                )
            return float(r)
        raise AssertionError(e.op)
    raise TypeError(f"not an expression node: {e!r}")


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def to_str(e):
    """Render `e` so that parse(to_str(e)) reproduces the same tree."""
    return _render(e, 0)


def _render(e, parent_prec):
    if isinstance(e, Num):
        s = repr(e.value)
        return s
    if isinstance(e, Var):
        return f"{e.kind}{e.index + 1}"
    if isinstance(e, Unary):
        if e.op == "neg":
            s = "-" + _render(e.arg, _PREC["neg"])
            return f"({s})" if parent_prec > _PREC["neg"] else s
        return f"{e.op}({_render(e.arg, 0)})"
    if isinstance(e, Binary):
        prec = _PREC[e.op]
        if e.op == "^":
            # right associative: parenthesize a left child of equal precedence
            left = _render(e.left, prec + 1)
            right = _render(e.right, prec)
        else:
            left = _render(e.left, prec)
            right = _render(e.right, prec + 1)
        s = f"{left} {e.op} {right}"
        return f"({s})" if parent_prec > prec else s
    raise TypeError(f"not an expression node: {e!r}")


def constant(value):
    """Expression node for a plain constant."""
    return Num(float(value), 0)


def free_variables(e):
    """Set of ('x'|'xi', 0-based index) pairs referenced by `e`."""
    out = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add((node.kind, node.index))
        elif isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.append(node.left)
            stack.append(node.right)
    return out
