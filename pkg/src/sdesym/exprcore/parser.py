"""Recursive-descent parser for the expression grammar.

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := number | ident | ident '(' expr ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so ``-x1^2``
is ``-(x1^2)`` and ``x1^-1`` is accepted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .expr import CONST, FUNCTIONS, NUM, VAR, Expr


class ParseError(ValueError):
    """Malformed expression text; ``column`` is 1-based."""

    def __init__(self, message: str, column: int, text: str = ""):
        self.column = column
        self.text = text
        super().__init__(f"{message} at column {column}")


@dataclass(frozen=True)
class Context:
    """Declared ambient dimensions and constant names for parsing."""

    n: int
    m: int
    constants: frozenset = frozenset()
    state_symbol: str = "x"

    @classmethod
    def of(cls, n: int, m: int, constants: Iterable[str] = (), state_symbol: str = "x") -> "Context":
        return cls(n, m, frozenset(constants), state_symbol)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        mt = _TOKEN.match(text, pos)
        if not mt:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[col - 1]!r}", col, text)
        kind = mt.lastgroup
        start = mt.start(kind)
        tokens.append((kind, mt.group(kind), start + 1))
        pos = mt.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, ctx: Context):
        self.text = text
        self.ctx = ctx
        self.tokens = _tokenize(text)
        self.i = 0
        sym = re.escape(ctx.state_symbol)
        self._state_re = re.compile(rf"{sym}(\d+)")

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, tok[2], self.text)

    def expect_op(self, op):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != op:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            self.error(f"expected {op!r}, found {what}")
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self.error(f"unexpected {tok[1]!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            e = Expr("add" if op == "+" else "sub", None, (e, self.term()))
        return e

    def term(self):
        e = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            e = Expr("mul" if op == "*" else "div", None, (e, self.unary()))
        return e

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Expr("neg", None, (self.unary(),))
        return self.power()

    def power(self):
        base = self.primary()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.advance()
            return Expr("pow", None, (base, self.unary()))
        return base

    def primary(self):
        tok = self.advance()
        kind, text, col = tok
        if kind == "num":
            return Expr(NUM, Fraction(text))
        if kind == "ident":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if text not in FUNCTIONS:
                    self.error(f"unknown function {text!r}", tok)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Expr(text, None, (arg,))
            return self.identifier(text, tok)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        if kind == "end":
            self.error("unexpected end of input", tok)
        self.error(f"unexpected {text!r}", tok)

    def identifier(self, name, tok):
        if name == "t":
            return Expr(VAR, ("t", 0))
        mt = self._state_re.fullmatch(name)
        if mt:
            i = int(mt.group(1))
            if not 1 <= i <= self.ctx.n:
                self.error(f"state variable {name!r} out of range 1..{self.ctx.n}", tok)
            return Expr(VAR, ("x", i))
        mt = re.fullmatch(r"w(\d+)", name)
        if mt:
            k = int(mt.group(1))
            if not 1 <= k <= self.ctx.m:
                self.error(f"Wiener variable {name!r} out of range 1..{self.ctx.m}", tok)
            return Expr(VAR, ("w", k))
        if name in self.ctx.constants:
            return Expr(CONST, name)
        if name in FUNCTIONS:
            self.error(f"function {name!r} used without argument", tok)
        self.error(f"unknown identifier {name!r}", tok)


def parse(text: str, context, constants: Iterable[str] = (), state_symbol: str = "x") -> Expr:
    """Parse ``text`` in ``context``, either a :class:`Context` or an ``(n, m)`` pair."""
    if not isinstance(context, Context):
        n, m = context
        context = Context.of(n, m, constants, state_symbol)
    return _Parser(text, context).parse()
