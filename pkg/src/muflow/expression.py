"""Arithmetic expressions in the variable x, used for initial data.

Grammar:

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' factor)?
    base   := number | 'x' | 'pi' | ident '(' expr ')' | '(' expr ')' | '-' base

with ident one of sin, cos, exp, abs.  '^' is right-associative and binds
tighter than unary minus on its left operand only through `base`, so
"-x^2" parses as "(-x)^2".
"""

from __future__ import annotations

import re
from typing import Callable

import numpy as np

from .errors import EvalError, ParseError

FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)

Node = Callable[[np.ndarray], np.ndarray]


def tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = len(text[pos:]) - len(text[pos:].lstrip()) + pos
            raise ParseError(f"unexpected character {text[bad]!r}", bad,
                             frozenset({"number", "x", "pi", "function", "(", "-"}))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected: set[str]):
        kind, value, pos = self.peek()
        shown = sorted(expected)
        what = f"'{shown[0]}'" if len(shown) == 1 else "one of " + ", ".join(f"'{e}'" for e in shown)
        found = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"expected {what}, found {found}", pos, frozenset(expected))

    def expect_op(self, op: str):
        kind, value, _ = self.peek()
        if kind != "op" or value != op:
            self.fail({op})
        self.take()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail({"+", "-", "*", "/", "^", "end of input"})
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            node = _binary(op, node, rhs)
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.factor()
            node = _binary(op, node, rhs)
        return node

    def factor(self) -> Node:
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            node = _binary("^", node, self.factor())
        return node

    def base(self) -> Node:
        kind, value, pos = self.peek()
        if kind == "num":
            self.take()
            c = float(value)
            return lambda x: np.full_like(x, c)
        if kind == "name":
            self.take()
            if value == "x":
                return lambda x: x
            if value == "pi":
                return lambda x: np.full_like(x, np.pi)
            if value in FUNCTIONS:
                fn = FUNCTIONS[value]
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return lambda x: fn(arg(x))
            raise ParseError(f"unknown identifier {value!r}", pos,
                             frozenset({"x", "pi", *FUNCTIONS}))
        if kind == "op" and value == "(":
            self.take()
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "op" and value == "-":
            self.take()
            arg = self.base()
            return lambda x: -arg(x)
        self.fail({"number", "x", "pi", "function", "(", "-"})


def _binary(op: str, a: Node, b: Node) -> Node:
    if op == "+":
        return lambda x: a(x) + b(x)
    if op == "-":
        return lambda x: a(x) - b(x)
    if op == "*":
        return lambda x: a(x) * b(x)
    if op == "/":
        return lambda x: a(x) / b(x)
    return lambda x: np.power(a(x), b(x))


def compile_expression(text: str) -> Node:
    """Parse `text` and return a vectorized evaluator of x."""
    return _Parser(text).parse()


def evaluate(text: str, x) -> np.ndarray:
    node = compile_expression(text)
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        values = node(x)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(np.broadcast_to(values, x.shape)))[0])
        raise EvalError(f"non-finite value at x={x.flat[bad]!r}")
    return values
