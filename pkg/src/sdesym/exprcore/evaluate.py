"""Scalar and vectorized numeric evaluation of expressions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .expr import CONST, NUM, VAR, Expr


@dataclass(frozen=True)
class Binding:
    """A point (t, x, w) at which expressions are evaluated."""

    t: float
    x: tuple = ()
    w: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "w", tuple(float(v) for v in self.w))
        object.__setattr__(self, "t", float(self.t))

    def check(self, n: int, m: int) -> None:
        if len(self.x) != n or len(self.w) != m:
            raise ValueError(f"binding has dimensions ({len(self.x)}, {len(self.w)}), expected ({n}, {m})")

    def as_dict(self) -> dict:
        return {"t": self.t, "x": list(self.x), "w": list(self.w)}


class DomainError(ArithmeticError):
    """Evaluation left the domain of a primitive.

    ``path`` lists child indices from the root to the offending node.
    """

    def __init__(self, message: str, path: tuple = (), node: Expr | None = None):
        self.path = tuple(path)
        self.node = node
        where = f" in {node}" if node is not None else ""
        super().__init__(f"{message}{where} at path {list(self.path)}")


class UnboundConstant(KeyError):
    pass


def _lookup_var(value, b: Binding, path, node):
    fam, idx = value
    try:
        if fam == "t":
            return b.t
        if fam == "x":
            return b.x[idx - 1]
        return b.w[idx - 1]
    except IndexError:
        raise DomainError(f"variable {fam}{idx} not bound", path, node) from None


def evaluate(e: Expr, b: Binding, consts: Mapping[str, float] | None = None) -> float:
    """Evaluate ``e`` at ``b`` in double precision.

    Raises :class:`DomainError` with the path to the first offending
    subexpression (log of a non-positive value, division by zero, ...).
    """
    consts = consts or {}

    def go(e: Expr, path: tuple) -> float:
        k = e.kind
        if k == NUM:
            return float(e.value)
        if k == VAR:
            return _lookup_var(e.value, b, path, e)
        if k == CONST:
            try:
                return float(consts[e.value])
            except KeyError:
                raise UnboundConstant(f"constant {e.value!r} is not bound") from None
        vals = [go(a, path + (i,)) for i, a in enumerate(e.args)]
        try:
            r = _apply(k, vals)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise DomainError(str(exc), path, e) from None
        if not math.isfinite(r):
            raise DomainError("non-finite result", path, e)
        return r

    return go(e, ())


def _apply(k: str, v: list) -> float:
    if k == "neg":
        return -v[0]
    if k == "add":
        return v[0] + v[1]
    if k == "sub":
        return v[0] - v[1]
    if k == "mul":
        return v[0] * v[1]
    if k == "div":
        if v[1] == 0.0:
            raise ZeroDivisionError("division by zero")
        return v[0] / v[1]
    if k == "pow":
        a, p = v
        if a == 0.0 and p < 0:
            raise ZeroDivisionError("zero raised to a negative power")
        if a < 0 and p != math.floor(p):
            raise ValueError("negative base with non-integer exponent")
        r = a**p
        if isinstance(r, complex):
            raise ValueError("complex power")
        return r
    a = v[0]
    if k == "log":
        if a <= 0:
            raise ValueError("log of non-positive value")
        return math.log(a)
    if k == "sqrt":
        if a < 0:
            raise ValueError("sqrt of negative value")
        return math.sqrt(a)
    if k == "exp":
        return math.exp(a)
    if k == "sin":
        return math.sin(a)
    if k == "cos":
        return math.cos(a)
    if k == "tan":
        return math.tan(a)
    if k == "atan":
        return math.atan(a)
    raise ValueError(f"unknown operator {k!r}")


# vectorized code generation; each distinct subtree is computed once
_NP_UNARY = {
    "neg": "(-{0})",
    "sin": "_np.sin({0})",
    "cos": "_np.cos({0})",
    "tan": "_np.tan({0})",
    "atan": "_np.arctan({0})",
    "exp": "_np.exp({0})",
    "log": "_log({0})",
    "sqrt": "_sqrt({0})",
}
_NP_BINARY = {
    "add": "({0} + {1})",
    "sub": "({0} - {1})",
    "mul": "({0} * {1})",
    "div": "_div({0}, {1})",
    "pow": "_pow({0}, {1})",
}


def _log(a):
    a = np.asarray(a, dtype=float)
    return np.log(np.where(a > 0, a, np.nan))


def _sqrt(a):
    a = np.asarray(a, dtype=float)
    return np.sqrt(np.where(a >= 0, a, np.nan))


def _div(a, b):
    b = np.asarray(b, dtype=float)
    return a / np.where(b != 0, b, np.nan)


def _pow(a, p):
    a = np.asarray(a, dtype=float)
    p = np.asarray(p, dtype=float)
    bad = ((a == 0) & (p < 0)) | ((a < 0) & (p != np.floor(p)))
    return np.where(bad, np.nan, np.power(np.where(bad, 1.0, a), p))


def _emit(exprs: Sequence[Expr]):
    lines = []
    names: dict = {}

    def go(e: Expr) -> str:
        if e in names:
            return names[e]
        k = e.kind
        if k == NUM:
            s = repr(float(e.value))
            names[e] = s
            return s
        if k == VAR:
            fam, idx = e.value
            s = "t" if fam == "t" else f"{fam}[{idx - 1}]"
            names[e] = s
            return s
        if k == CONST:
            s = f"c[{e.value!r}]"
            names[e] = s
            return s
        args = [go(a) for a in e.args]
        tmpl = _NP_UNARY.get(k) or _NP_BINARY[k]
        name = f"_v{len(lines)}"
        lines.append(f"    {name} = {tmpl.format(*args)}")
        names[e] = name
        return name

    outs = [go(e) for e in exprs]
    return lines, outs


@lru_cache(maxsize=4096)
def _compile_tuple(exprs: tuple):
    lines, outs = _emit(exprs)
    src = "def _f(t, x, w, c):\n" + "\n".join(lines + [f"    return ({', '.join(outs)},)"])
    ns = {"_np": np, "_log": _log, "_sqrt": _sqrt, "_div": _div, "_pow": _pow}
    exec(compile(src, "<sdesym-expr>", "exec"), ns)
    return ns["_f"]


class Compiled:
    """Vectorized evaluator for a fixed list of expressions.

    Call with ``t`` (scalar or array), ``x`` and ``w`` (sequences of scalars
    or arrays, or 2-D arrays indexed ``[i, sample]``) and a constants map.
    Invalid operations produce NaN instead of raising.
    """

    def __init__(self, exprs: Sequence[Expr]):
        self.exprs = tuple(exprs)
        self._fn = _compile_tuple(self.exprs)

    def __call__(self, t, x, w, consts: Mapping[str, float] | None = None) -> list:
        with np.errstate(all="ignore"):
            return list(self._fn(t, x, w, _ConstView(consts or {})))


class _ConstView(dict):
    def __missing__(self, key):
        raise UnboundConstant(f"constant {key!r} is not bound")


def compile_exprs(exprs: Sequence[Expr]) -> Compiled:
    return Compiled(exprs)


def evaluate_vectorized(e: Expr, t, x, w, consts: Mapping[str, float] | None = None) -> np.ndarray:
    """Evaluate ``e`` over arrays; invalid points come back as NaN."""
    out = Compiled([e])(t, x, w, consts)[0]
    shape = np.broadcast(np.asarray(t), *[np.asarray(v) for v in x], *[np.asarray(v) for v in w]).shape
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()
