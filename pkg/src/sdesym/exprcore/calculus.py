"""Symbolic partial derivatives and substitution."""

from __future__ import annotations

from typing import Mapping

from . import expr as E
from .expr import CONST, NUM, VAR, Expr


def as_var(v) -> tuple:
    """Normalize a variable designator to its ``(family, index)`` tuple.

    Accepts an Expr variable, a tuple, or a name such as ``"t"``, ``"x2"``.
    """
    if isinstance(v, Expr):
        if v.kind != VAR:
            raise TypeError(f"{v} is not a variable")
        return v.value
    if isinstance(v, tuple):
        return v
    if isinstance(v, str):
        if v == "t":
            return ("t", 0)
        if v[:1] in ("x", "w") and v[1:].isdigit():
            return (v[0], int(v[1:]))
    raise ValueError(f"not a variable: {v!r}")


def diff(e: Expr, v) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``v``."""
    v = as_var(v)
    memo: dict = {}

    def d(e: Expr) -> Expr:
        r = memo.get(e)
        if r is not None:
            return r
        r = _d(e)
        memo[e] = r
        return r

    def _d(e: Expr) -> Expr:
        k = e.kind
        if k in (NUM, CONST):
            return E.ZERO
        if k == VAR:
            return E.ONE if e.value == v else E.ZERO
        if k == "neg":
            return E.neg(d(e.args[0]))
        if k in ("add", "sub"):
            a, b = e.args
            return (E.add if k == "add" else E.sub)(d(a), d(b))
        if k == "mul":
            a, b = e.args
            return E.add(E.mul(d(a), b), E.mul(a, d(b)))
        if k == "div":
            a, b = e.args
            da, db = d(a), d(b)
            if db == E.ZERO:
                return E.div(da, b)
            return E.sub(E.div(da, b), E.div(E.mul(a, db), E.power(b, E.num(2))))
        if k == "pow":
            a, p = e.args
            da, dp = d(a), d(p)
            if dp == E.ZERO:
                if da == E.ZERO:
                    return E.ZERO
                return E.mul(E.mul(p, E.power(a, E.sub(p, E.ONE))), da)
            if da == E.ZERO:
                return E.mul(E.mul(e, E.log(a)), dp)
            return E.mul(e, E.add(E.mul(dp, E.log(a)), E.div(E.mul(p, da), a)))
        a = e.args[0]
        da = d(a)
        if da == E.ZERO:
            return E.ZERO
        if k == "exp":
            outer = e
        elif k == "log":
            return E.div(da, a)
        elif k == "sqrt":
            return E.div(da, E.mul(E.num(2), e))
        elif k == "sin":
            outer = E.cos(a)
        elif k == "cos":
            outer = E.neg(E.sin(a))
        elif k == "tan":
            outer = E.add(E.ONE, E.power(e, E.num(2)))
        elif k == "atan":
            return E.div(da, E.add(E.ONE, E.power(a, E.num(2))))
        else:
            raise ValueError(f"unknown operator {k!r}")
        return E.mul(outer, da)

    return d(e)


def substitute(e: Expr, mapping: Mapping) -> Expr:
    """Simultaneously replace variables (or constants, by name) in ``e``.

    Keys may be anything :func:`as_var` accepts, or ``("const", name)``.
    """
    table = {}
    for key, val in mapping.items():
        if isinstance(key, Expr) and key.kind == CONST:
            table[(CONST, key.value)] = E.as_expr(val)
        elif isinstance(key, tuple) and key[0] == CONST:
            table[key] = E.as_expr(val)
        else:
            table[(VAR, as_var(key))] = E.as_expr(val)
    memo: dict = {}

    def go(e: Expr) -> Expr:
        r = memo.get(e)
        if r is not None:
            return r
        if e.kind in (VAR, CONST):
            r = table.get((e.kind, e.value), e)
        elif e.kind == NUM:
            r = e
        else:
            args = tuple(go(a) for a in e.args)
            r = e if args == e.args else Expr(e.kind, None, args)
        memo[e] = r
        return r

    return go(e)


def gradient(e: Expr, family: str, count: int) -> list:
    return [diff(e, (family, i)) for i in range(1, count + 1)]
