"""Rule-based simplification over a flat sum-of-products normal form.

An expression is converted to a *poly*: a dict mapping monomials to exact
rational coefficients. A monomial is a sorted tuple of ``(base, exponent)``
pairs with rational exponents. Bases are

* variables and named constants,
* function applications whose argument is itself in normal form,
* ``exp(u)``; a monomial holds at most one, always with exponent 1,
* positive rationals carrying an irrational power (``2^(1/2)``),
* compound bases: a normalized sum, or a monomial whose fractional power
  could not be distributed soundly.

Rewrites applied: constant folding, 0/1 identities, like-term collection,
power merging, expansion of sums to small positive integer powers,
``exp(a)*exp(b) = exp(a + b)``, ``log(exp(a)) = a`` and exact folding of
functions at 0. With ``assume_positive=True`` every variable, constant and
subexpression under a log or fractional power is taken to be positive,
which additionally enables ``exp(k*log(u)) = u^k``, splitting logs of
products and distributing fractional powers over products.

The result equals the input wherever the input is defined.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Tuple

from .expr import CONST, FUNCTIONS, NUM, VAR, Expr, ZERO, num

Mono = Tuple[Tuple[Expr, Fraction], ...]
Poly = Dict[Mono, Fraction]

MAX_EXPAND = 12
_CACHE_LIMIT = 200_000
_ATOMIC_KINDS = (VAR, CONST) + FUNCTIONS
_F0 = Fraction(0)
_F1 = Fraction(1)


def _mono_key(m: Mono):
    return tuple((b.sort_key, e) for b, e in m)


def _term_key(m: Mono):
    return (len(m) == 0, _mono_key(m))


def _int_root(n: int, q: int):
    """Exact q-th root of a non-negative integer, or None."""
    if n < 2:
        return n
    r = round(n ** (1.0 / q))
    for c in (r - 1, r, r + 1):
        if c >= 0 and c**q == n:
            return c
    return None


class _Simplifier:
    def __init__(self, positive: bool):
        self.positive = positive
        self._poly: dict = {}
        self._expr: dict = {}

    # ---- small poly helpers -------------------------------------------
    @staticmethod
    def const(c) -> Poly:
        c = Fraction(c)
        return {(): c} if c != 0 else {}

    @staticmethod
    def atom(base: Expr, e=_F1) -> Poly:
        return {((base, Fraction(e)),): _F1}

    @staticmethod
    def add(p: Poly, q: Poly) -> Poly:
        out = dict(p)
        for m, c in q.items():
            v = out.get(m, _F0) + c
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return out

    @staticmethod
    def scale(p: Poly, c) -> Poly:
        c = Fraction(c)
        if c == 0:
            return {}
        return {m: v * c for m, v in p.items()}

    def mul(self, p: Poly, q: Poly) -> Poly:
        if not p or not q:
            return {}
        if len(p) > len(q):
            p, q = q, p
        out: Poly = {}
        for m1, c1 in p.items():
            for m2, c2 in q.items():
                for m, c in self.mono_mul(m1, m2).items():
                    v = out.get(m, _F0) + c * c1 * c2
                    if v:
                        out[m] = v
                    else:
                        out.pop(m, None)
        return out

    def is_plain(self, base: Expr) -> bool:
        return base.kind in (VAR, CONST) or (base.kind in FUNCTIONS and base.kind != "exp")

    def is_opaque(self, base: Expr) -> bool:
        """True if the base's own normal form is just itself."""
        p = self.to_poly(base)
        return p == {((base, _F1),): _F1}

    def mono_mul(self, m1: Mono, m2: Mono) -> Poly:
        if not m1:
            return {m2: _F1}
        if not m2:
            return {m1: _F1}
        d: dict = {}
        for b, e in m1:
            d[b] = e
        for b, e in m2:
            d[b] = d.get(b, _F0) + e
        return self.norm_factors(d)

    def norm_factors(self, d: dict) -> Poly:
        """Turn a base->exponent map into a poly, applying merge rules."""
        coef = _F1
        exp_arg: Poly = {}
        has_exp = False
        extra = []
        kept = []
        for b, e in d.items():
            if e == 0:
                continue
            k = b.kind
            if k == "exp":
                has_exp = True
                exp_arg = self.add(exp_arg, self.scale(self.to_poly(b.args[0]), e))
            elif k == NUM:
                c = b.value
                whole = e.numerator // e.denominator
                frac = e - whole
                coef *= c**whole
                if frac:
                    kept.append((b, frac))
            elif self.is_plain(b):
                kept.append((b, e))
            else:
                pb = self.to_poly(b)
                if self.is_opaque(b):
                    kept.append((b, e))
                elif e.denominator == 1 and (len(pb) == 1 or 0 < e <= MAX_EXPAND):
                    extra.append(self.pow_rat(pb, e))
                elif e.denominator == 1 and pb[min(pb, key=_term_key)] != 1:
                    # integer power of a sum kept with a negative leading sign
                    extra.append(self.pow_rat(pb, e))
                else:
                    kept.append((b, e))
        if has_exp:
            pe = self.make_exp(exp_arg)
            if len(pe) == 1:
                (me, ce), = pe.items()
                if len(me) == 1 and me[0][0].kind == "exp" and ce == 1:
                    kept.append(me[0])
                    pe = None
            if pe is not None:
                extra.append(pe)
        kept.sort(key=lambda be: be[0].sort_key)
        out: Poly = {tuple(kept): coef}
        for p in extra:
            out = self.mul(out, p)
        return out

    # ---- powers ------------------------------------------------------
    def const_pow(self, c: Fraction, r: Fraction) -> Poly:
        if r.denominator == 1:
            if c == 0:
                if r > 0:
                    return {}
                return self.atom(Expr("pow", None, (ZERO, num(r))))
            return self.const(c ** int(r))
        if c == 0:
            return {} if r > 0 else self.atom(Expr("pow", None, (ZERO, num(r))))
        if c < 0:
            return self.atom(Expr("pow", None, (num(c), num(r))))
        return self.mul(self.int_pow(c.numerator, r), self.int_pow(c.denominator, -r))

    def int_pow(self, n: int, r: Fraction) -> Poly:
        """``n^r`` for a positive integer n, as rational times ``n^f`` with 0 < f < 1."""
        if n == 1:
            return self.const(1)
        whole = r.numerator // r.denominator
        frac = r - whole
        out = self.const(Fraction(n) ** whole)
        if frac:
            root = _int_root(n, frac.denominator)
            if root is not None:
                out = self.scale(out, Fraction(root) ** frac.numerator)
            else:
                out = self.mul(out, self.atom(num(n), frac))
        return out

    def pow_rat(self, p: Poly, r: Fraction) -> Poly:
        r = Fraction(r)
        if r == 0:
            return self.const(1)
        if r == 1:
            return dict(p)
        if not p:
            return self.const_pow(_F0, r)
        if len(p) == 1:
            (m, c), = p.items()
            if not m:
                return self.const_pow(c, r)
            return self.mono_pow(m, c, r)
        if r.denominator == 1 and 0 < r <= MAX_EXPAND:
            out = self.const(1)
            base = p
            n = int(r)
            while n:
                if n & 1:
                    out = self.mul(out, base)
                n >>= 1
                if n:
                    base = self.mul(base, base)
            return out
        return self.sum_atom_pow(p, r)

    def mono_pow(self, m: Mono, c: Fraction, r: Fraction) -> Poly:
        if r.denominator == 1:
            d = {b: e * r for b, e in m}
            return self.mul(self.const_pow(c, r), self.norm_factors(d))
        # factors that are non-negative wherever defined can always be split off
        safe = tuple((b, e) for b, e in m if b.kind in ("exp", NUM) or e.denominator != 1)
        rest = tuple((b, e) for b, e in m if not (b.kind in ("exp", NUM) or e.denominator != 1))
        allowed = c > 0 and (self.positive or not rest or (len(rest) == 1 and rest[0][1].numerator % 2 == 1))
        if allowed:
            d = {b: e * r for b, e in m}
            return self.mul(self.const_pow(c, r), self.norm_factors(d))
        out = self.norm_factors({b: e * r for b, e in safe}) if safe else self.const(1)
        sign = _F1 if c > 0 else -_F1
        out = self.mul(out, self.const_pow(abs(c), r))
        if rest:
            base = self.to_expr({rest: sign})
            out = self.mul(out, self.atom(base, r))
        elif sign < 0:
            out = self.mul(out, self.const_pow(sign, r))
        return out

    def sum_atom_pow(self, p: Poly, r: Fraction) -> Poly:
        lead = p[min(p, key=_term_key)]
        if lead < 0 and r.denominator != 1:
            lead = -lead
        normalized = self.scale(p, 1 / lead)
        base = self.to_expr(normalized)
        return self.mul(self.const_pow(lead, r), self.atom(base, r))

    # ---- functions ---------------------------------------------------
    def make_exp(self, p: Poly) -> Poly:
        if not p:
            return self.const(1)
        out = self.const(1)
        rest = dict(p)
        if self.positive:
            for m, c in p.items():
                if len(m) == 1 and m[0][1] == 1 and m[0][0].kind == "log":
                    del rest[m]
                    out = self.mul(out, self.pow_rat(self.to_poly(m[0][0].args[0]), c))
        if rest:
            out = self.mul(out, self.atom(Expr("exp", None, (self.to_expr(rest),))))
        return out

    def make_log(self, p: Poly) -> Poly:
        if not p:
            return self.atom(Expr("log", None, (ZERO,)))
        if len(p) > 1:
            return self.atom(Expr("log", None, (self.to_expr(p),)))
        (m, c), = p.items()
        if not m:
            if c == 1:
                return {}
            return self.atom(Expr("log", None, (num(c),)))
        out: Poly = {}
        exps = [b for b, _ in m if b.kind == "exp"]
        if exps:
            out = self.to_poly(exps[0].args[0])
            m = tuple((b, e) for b, e in m if b.kind != "exp")
            if not m and c == 1:
                return out
        if not self.positive or c < 0:
            return self.add(out, self.atom(Expr("log", None, (self.to_expr({m: c}),))))
        if c != 1:
            out = self.add(out, self.atom(Expr("log", None, (num(c),))))
        for b, e in m:
            if b.kind == NUM or b.kind in _ATOMIC_KINDS or self.is_opaque(b):
                term = self.atom(Expr("log", None, (b,)))
            else:
                term = self.make_log(self.to_poly(b))
            out = self.add(out, self.scale(term, e))
        return out

    def make_func(self, k: str, p: Poly) -> Poly:
        if not p:
            return self.const(1) if k == "cos" else {}
        return self.atom(Expr(k, None, (self.to_expr(p),)))

    # ---- conversion --------------------------------------------------
    def to_poly(self, e: Expr) -> Poly:
        r = self._poly.get(e)
        if r is None:
            if len(self._poly) > _CACHE_LIMIT:
                self._poly.clear()
            r = self._to_poly(e)
            self._poly[e] = r
        return r

    def _to_poly(self, e: Expr) -> Poly:
        k = e.kind
        if k == NUM:
            return self.const(e.value)
        if k in (VAR, CONST):
            return self.atom(e)
        if k == "neg":
            return self.scale(self.to_poly(e.args[0]), -1)
        if k == "add":
            return self.add(self.to_poly(e.args[0]), self.to_poly(e.args[1]))
        if k == "sub":
            return self.add(self.to_poly(e.args[0]), self.scale(self.to_poly(e.args[1]), -1))
        if k == "mul":
            return self.mul(self.to_poly(e.args[0]), self.to_poly(e.args[1]))
        if k == "div":
            pa, pb = self.to_poly(e.args[0]), self.to_poly(e.args[1])
            if len(pb) > 1 and pa:
                qr = poly_divide(pa, pb, self)
                if qr is not None and not qr[1]:
                    return qr[0]
            return self.mul(pa, self.recip(e.args[1]))
        if k == "pow":
            pa, pb = self.to_poly(e.args[0]), self.to_poly(e.args[1])
            if not pb or (len(pb) == 1 and () in pb):
                return self.pow_rat(pa, pb.get((), _F0))
            return self.make_exp(self.mul(pb, self.make_log(pa)))
        pa = self.to_poly(e.args[0])
        if k == "sqrt":
            return self.pow_rat(pa, Fraction(1, 2))
        if k == "exp":
            return self.make_exp(pa)
        if k == "log":
            return self.make_log(pa)
        return self.make_func(k, pa)

    def recip(self, e: Expr) -> Poly:
        """Reciprocal of ``e``, keeping powers of sums unexpanded."""
        if e.kind == "mul":
            return self.mul(self.recip(e.args[0]), self.recip(e.args[1]))
        if e.kind == "pow":
            pb = self.to_poly(e.args[1])
            if not pb or (len(pb) == 1 and () in pb):
                return self.pow_rat(self.to_poly(e.args[0]), -pb.get((), _F0))
        return self.pow_rat(self.to_poly(e), -_F1)

    def factor_expr(self, b: Expr, e: Fraction) -> Expr:
        return b if e == 1 else Expr("pow", None, (b, num(e)))

    def term_expr(self, m: Mono, c: Fraction, signed: bool = False) -> Expr:
        """Render ``|c| * m``, or ``c * m`` when ``signed``."""
        negative = signed and c < 0
        c = abs(c)
        numer = []
        denom = []
        for b, e in m:
            if e < 0 and (b.kind in _ATOMIC_KINDS or b.kind == NUM):
                denom.append(self.factor_expr(b, -e))
            else:
                numer.append(self.factor_expr(b, e))
        if c.numerator != 1 or not numer:
            numer.insert(0, num(c.numerator))
        if c.denominator != 1:
            denom.insert(0, num(c.denominator))
        if negative:
            first = numer[0]
            numer[0] = num(-first.value) if first.kind == NUM else Expr("neg", None, (first,))
        top = _chain("mul", numer)
        if denom:
            return Expr("div", None, (top, _chain("mul", denom)))
        return top

    def to_expr(self, p: Poly) -> Expr:
        key = tuple(sorted(p.items(), key=lambda mc: _term_key(mc[0])))
        r = self._expr.get(key)
        if r is not None:
            return r
        if not key:
            r = ZERO
        else:
            r = None
            for m, c in key:
                if r is None:
                    r = self.term_expr(m, c, signed=True)
                else:
                    r = Expr("add" if c > 0 else "sub", None, (r, self.term_expr(m, c)))
        if len(self._expr) > _CACHE_LIMIT:
            self._expr.clear()
        self._expr[key] = r
        return r


def _chain(kind: str, items: list) -> Expr:
    out = items[0]
    for it in items[1:]:
        out = Expr(kind, None, (out, it))
    return out


_SIMPLIFIERS = {False: _Simplifier(False), True: _Simplifier(True)}


def simplify(e: Expr, assume_positive: bool = False) -> Expr:
    """Return the normal form of ``e``; idempotent."""
    s = _SIMPLIFIERS[bool(assume_positive)]
    return s.to_expr(s.to_poly(e))


def to_poly(e: Expr, assume_positive: bool = False) -> Poly:
    return _SIMPLIFIERS[bool(assume_positive)].to_poly(e)


def from_poly(p: Poly, assume_positive: bool = False) -> Expr:
    return _SIMPLIFIERS[bool(assume_positive)].to_expr(p)


def expand_terms(e: Expr, assume_positive: bool = False) -> list:
    """The additive terms of the normal form, each as an expression."""
    s = _SIMPLIFIERS[bool(assume_positive)]
    p = s.to_poly(e)
    return [s.to_expr({m: c}) for m, c in sorted(p.items(), key=lambda mc: _term_key(mc[0]))]


# ---- polynomial division ---------------------------------------------


def _divisible_ok(p: Poly) -> bool:
    return all(b.kind not in ("exp", NUM) for m in p for b, _ in m)


def poly_divide(p: Poly, d: Poly, s: _Simplifier | None = None, max_steps: int = 20000):
    """Multivariate division of ``p`` by a single poly ``d``.

    Returns ``(quotient, remainder)``, or None if the operands contain bases
    the division cannot treat as independent symbols. With one divisor the
    remainder is zero exactly when ``d`` divides ``p``.
    """
    if not d:
        raise ZeroDivisionError("division by the zero polynomial")
    if not (_divisible_ok(p) and _divisible_ok(d)):
        return None
    bases = sorted({b for poly in (p, d) for m in poly for b, _ in m}, key=lambda b: b.sort_key)
    index = {b: i for i, b in enumerate(bases)}
    nb = len(bases)

    def vec(m: Mono):
        v = [_F0] * nb
        for b, e in m:
            v[index[b]] = e
        return tuple(v)

    def mono(v) -> Mono:
        return tuple((bases[i], e) for i, e in enumerate(v) if e != 0)

    lead_d = max(d, key=vec)
    lead_v = vec(lead_d)
    lead_c = d[lead_d]
    dv = [(vec(m), c) for m, c in d.items()]
    rem: dict = {}
    work = {vec(m): c for m, c in p.items()}
    quot: dict = {}
    steps = 0
    while work:
        steps += 1
        if steps > max_steps:
            return None
        v = max(work)
        c = work.pop(v)
        diff = tuple(a - b for a, b in zip(v, lead_v))
        # only bases present in the leading divisor term constrain divisibility
        if all(x >= 0 or lead_v[i] == 0 for i, x in enumerate(diff)):
            q = c / lead_c
            quot[diff] = quot.get(diff, _F0) + q
            for dvv, dc in dv:
                if dvv == lead_v:
                    continue
                w = tuple(a + b for a, b in zip(diff, dvv))
                nv = work.get(w, _F0) - q * dc
                if nv:
                    work[w] = nv
                else:
                    work.pop(w, None)
        else:
            rem[v] = rem.get(v, _F0) + c
    qp = {mono(v): c for v, c in quot.items() if c}
    rp = {mono(v): c for v, c in rem.items() if c}
    return qp, rp


def divide(a: Expr, b: Expr, assume_positive: bool = False):
    """Divide normal forms; returns ``(quotient, remainder)`` expressions or None."""
    s = _SIMPLIFIERS[bool(assume_positive)]
    r = poly_divide(s.to_poly(a), s.to_poly(b), s)
    if r is None:
        return None
    return s.to_expr(r[0]), s.to_expr(r[1])


def has_factor(e: Expr, factor: Expr, assume_positive: bool = False):
    """Return the cofactor if ``factor`` divides ``e`` exactly, else None."""
    r = divide(e, factor, assume_positive)
    if r is None or r[1] != ZERO:
        return None
    return r[0]


def is_symbolic_zero(e: Expr, assume_positive: bool = False) -> bool:
    """True if ``e`` reduces to 0, possibly after clearing sum denominators.

    Multiplying by a power of a denominator sum leaves the zero set unchanged
    wherever ``e`` is defined, so the test stays sound.
    """
    s = _SIMPLIFIERS[bool(assume_positive)]
    p = s.to_poly(e)
    if not p:
        return True
    dens: dict = {}
    for m in p:
        for b, k in m:
            if k < 0 and k.denominator == 1 and b.kind not in _ATOMIC_KINDS + (NUM,) and len(s.to_poly(b)) > 1:
                dens[b] = max(dens.get(b, 0), -k)
    if not dens or any(k > MAX_EXPAND for k in dens.values()):
        return False
    q = p
    for b, k in sorted(dens.items(), key=lambda bk: bk[0].sort_key):
        q = s.mul(q, s.atom(b, k))
    return not q


__all__ = [
    "simplify",
    "to_poly",
    "from_poly",
    "expand_terms",
    "divide",
    "has_factor",
    "is_symbolic_zero",
]
