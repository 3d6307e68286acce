"""Render expressions in the same grammar the parser accepts."""

from __future__ import annotations

from fractions import Fraction

from .expr import CONST, FUNCTIONS, NUM, VAR, Expr

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_ATOM = 5


def format_number(v: Fraction) -> str:
    """Exact text for a rational; decimal when the expansion terminates."""
    if v.denominator == 1:
        return str(v.numerator)
    q = v.denominator
    k2 = k5 = 0
    while q % 2 == 0:
        q //= 2
        k2 += 1
    while q % 5 == 0:
        q //= 5
        k5 += 1
    digits = max(k2, k5)
    if q == 1 and digits <= 20:
        scaled = abs(v.numerator) * (10**digits // v.denominator)
        s = str(scaled).rjust(digits + 1, "0")
        s = s[:-digits] + "." + s[-digits:]
        s = s.rstrip("0").rstrip(".")
        return ("-" if v < 0 else "") + s
    return f"{v.numerator}/{v.denominator}"


def _prec(e: Expr) -> int:
    if e.kind == NUM:
        v = e.value
        if v < 0:
            return _PREC["neg"]
        if "/" in format_number(v):
            return _PREC["div"]
        return _ATOM
    if e.kind in (VAR, CONST) or e.kind in FUNCTIONS:
        return _ATOM
    return _PREC[e.kind]


def _var_name(value, names) -> str:
    fam, idx = value
    if fam == "t":
        return "t"
    if names and fam in names:
        return names[fam][idx - 1]
    return f"{fam}{idx}"


def to_string(e: Expr, names: dict | None = None) -> str:
    """Print ``e``; ``names`` optionally maps ``x``/``w`` to display names."""

    def wrap(child: Expr, min_prec: int) -> str:
        s = go(child)
        return f"({s})" if _prec(child) < min_prec else s

    def go(e: Expr) -> str:
        k = e.kind
        if k == NUM:
            s = format_number(abs(e.value))
            return "-" + (f"({s})" if "/" in s else s) if e.value < 0 else s
        if k == VAR:
            return _var_name(e.value, names)
        if k == CONST:
            return e.value
        if k in FUNCTIONS:
            return f"{k}({go(e.args[0])})"
        if k == "neg":
            return "-" + wrap(e.args[0], _PREC["neg"])
        a, b = e.args
        if k == "add":
            return f"{wrap(a, 1)} + {wrap(b, 2)}"
        if k == "sub":
            return f"{wrap(a, 1)} - {wrap(b, 2)}"
        if k == "mul":
            return f"{wrap(a, 2)}*{wrap(b, 3)}"
        if k == "div":
            return f"{wrap(a, 2)}/{wrap(b, 3)}"
        # pow is right-associative; a negated base needs parentheses
        return f"{wrap(a, _ATOM)}^{wrap(b, 3)}"

    return go(e)
