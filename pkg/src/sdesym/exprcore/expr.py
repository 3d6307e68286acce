"""Immutable expression trees over t, x_i, w_k and named constants."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterator

NUM = "num"
VAR = "var"
CONST = "const"

UNARY = ("neg", "sin", "cos", "tan", "atan", "exp", "log", "sqrt")
FUNCTIONS = ("sin", "cos", "tan", "atan", "exp", "log", "sqrt")
BINARY = ("add", "sub", "mul", "div", "pow")

_VAR_ORDER = {"t": 0, "x": 1, "w": 2}


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError(f"non-finite number {value!r}")
        # shortest round-tripping decimal, so 0.1 stays 1/10
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot convert {type(value).__name__} to a number")


class Expr:
    """A node of an expression tree.

    ``kind`` is one of ``num``, ``var``, ``const``, a unary operator name or a
    binary operator name. ``value`` holds the payload of leaves: a Fraction for
    numbers, a ``(family, index)`` tuple for variables (family ``t``, ``x`` or
    ``w``; index 0 for ``t``) and the name for constants. Nodes are hashable
    and compare structurally.
    """

    __slots__ = ("kind", "value", "args", "_hash", "_key")

    def __init__(self, kind: str, value=None, args: tuple = ()):
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "args", tuple(args))
        object.__setattr__(self, "_hash", None)
        object.__setattr__(self, "_key", None)

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.kind, self.value, self.args))
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        if hash(self) != hash(other):
            return False
        return self.kind == other.kind and self.value == other.value and self.args == other.args

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __reduce__(self):
        return (Expr, (self.kind, self.value, self.args))

    @property
    def sort_key(self) -> tuple:
        """Total order used for canonical forms."""
        k = self._key
        if k is None:
            if self.kind == NUM:
                k = (0, self.value)
            elif self.kind == CONST:
                k = (1, self.value)
            elif self.kind == VAR:
                k = (2, _VAR_ORDER[self.value[0]], self.value[1])
            elif self.kind in UNARY:
                k = (3, self.kind, self.args[0].sort_key)
            else:
                k = (4, self.kind, self.args[0].sort_key, self.args[1].sort_key)
            object.__setattr__(self, "_key", k)
        return k

    # arithmetic builds trees with light folding of trivial identities
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __rpow__(self, other):
        return power(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        from .printer import to_string

        return f"Expr({to_string(self)!r})"

    def __str__(self):
        from .printer import to_string

        return to_string(self)

    def walk(self) -> Iterator["Expr"]:
        stack = [self]
        while stack:
            e = stack.pop()
            yield e
            stack.extend(e.args)

    @property
    def is_number(self) -> bool:
        return self.kind == NUM


def num(value) -> Expr:
    return Expr(NUM, to_fraction(value))


def const(name: str) -> Expr:
    return Expr(CONST, name)


def var(family: str, index: int = 0) -> Expr:
    if family == "t":
        return Expr(VAR, ("t", 0))
    if family not in ("x", "w"):
        raise ValueError(f"unknown variable family {family!r}")
    if index < 1:
        raise ValueError("variable indices start at 1")
    return Expr(VAR, (family, index))


T = Expr(VAR, ("t", 0))
ZERO = num(0)
ONE = num(1)


def X(i: int) -> Expr:
    return var("x", i)


def W(k: int) -> Expr:
    return var("w", k)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return num(value)


def _is_num(e: Expr, v=None) -> bool:
    return e.kind == NUM and (v is None or e.value == v)


def neg(a: Expr) -> Expr:
    if a.kind == NUM:
        return Expr(NUM, -a.value)
    if a.kind == "neg":
        return a.args[0]
    return Expr("neg", None, (a,))


def add(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b):
        return Expr(NUM, a.value + b.value)
    if _is_num(a, 0):
        return b
    if _is_num(b, 0):
        return a
    return Expr("add", None, (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b):
        return Expr(NUM, a.value - b.value)
    if _is_num(b, 0):
        return a
    if _is_num(a, 0):
        return neg(b)
    return Expr("sub", None, (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b):
        return Expr(NUM, a.value * b.value)
    if _is_num(a, 0) or _is_num(b, 0):
        return ZERO
    if _is_num(a, 1):
        return b
    if _is_num(b, 1):
        return a
    if _is_num(a, -1):
        return neg(b)
    if _is_num(b, -1):
        return neg(a)
    return Expr("mul", None, (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b) and b.value != 0:
        return Expr(NUM, a.value / b.value)
    if _is_num(b, 1):
        return a
    if _is_num(a, 0) and not _is_num(b, 0):
        return ZERO
    return Expr("div", None, (a, b))


def power(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 0):
        return ONE
    if _is_num(b, 1):
        return a
    if _is_num(a) and _is_num(b) and b.value.denominator == 1 and not (a.value == 0 and b.value < 0):
        return Expr(NUM, a.value ** int(b.value))
    return Expr("pow", None, (a, b))


def func(name: str, a: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    return Expr(name, None, (a,))


def sin(a):
    return func("sin", as_expr(a))


def cos(a):
    return func("cos", as_expr(a))


def tan(a):
    return func("tan", as_expr(a))


def atan(a):
    return func("atan", as_expr(a))


def exp(a):
    return func("exp", as_expr(a))


def log(a):
    return func("log", as_expr(a))


def sqrt(a):
    return func("sqrt", as_expr(a))


def free_vars(e: Expr) -> set[tuple[str, int]]:
    return {n.value for n in e.walk() if n.kind == VAR}


def constants_used(e: Expr) -> set[str]:
    return {n.value for n in e.walk() if n.kind == CONST}


def depends_on(e: Expr, family: str) -> bool:
    """True if ``e`` mentions any variable of the given family (t, x or w)."""
    return any(n.kind == VAR and n.value[0] == family for n in e.walk())


def size(e: Expr) -> int:
    return sum(1 for _ in e.walk())
