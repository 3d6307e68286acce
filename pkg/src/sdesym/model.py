"""Ito and Stratonovich SDE records and the structural operators on them."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .exprcore import (
    ZERO,
    Expr,
    SampleDomain,
    ZeroResult,
    combine,
    depends_on,
    diff,
    is_zero,
    parse,
    simplify,
    to_string,
)
from .exprcore.expr import add, mul, num, sub


class DimensionError(ValueError):
    pass


class ModelFormatError(ValueError):
    """A model document is malformed."""


def _check_shapes(drift, sigma, n, m, what):
    if len(drift) != n:
        raise DimensionError(f"{what} has {len(drift)} entries, expected n={n}")
    if len(sigma) != n or any(len(row) != m for row in sigma):
        raise DimensionError(f"diffusion must be {n}x{m}")


@dataclass(frozen=True)
class _SDEBase:
    drift: tuple
    sigma: tuple
    constants: dict = field(default_factory=dict)
    name: str = ""
    var_names: tuple | None = None
    sample_box: SampleDomain = field(default_factory=SampleDomain)
    notes: str = ""

    def __post_init__(self):
        drift = tuple(self.drift)
        sigma = tuple(tuple(row) for row in self.sigma)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "constants", dict(self.constants))
        if self.var_names is not None:
            object.__setattr__(self, "var_names", tuple(self.var_names))
        n = len(drift)
        m = len(sigma[0]) if sigma else 0
        _check_shapes(drift, sigma, n, m, "drift")
        for e in drift + tuple(x for row in sigma for x in row):
            if not isinstance(e, Expr):
                raise TypeError("coefficients must be Expr instances")
            if depends_on(e, "w"):
                raise ValueError(f"coefficient {e} depends on a Wiener variable")
            for node in e.walk():
                if node.kind == "var" and node.value[0] == "x" and node.value[1] > n:
                    raise DimensionError(f"coefficient {e} uses x{node.value[1]} but n={n}")

    @property
    def n(self) -> int:
        return len(self.drift)

    @property
    def m(self) -> int:
        return len(self.sigma[0]) if self.sigma else 0

    def coefficients(self):
        return list(self.drift) + [x for row in self.sigma for x in row]

    def domain(self) -> SampleDomain:
        return self.sample_box


@dataclass(frozen=True)
class ItoSDE(_SDEBase):
    """dx^i = f^i(x, t) dt + sigma^i_k(x, t) dw^k."""

    @property
    def f(self) -> tuple:
        return self.drift


@dataclass(frozen=True)
class StratSDE(_SDEBase):
    """dx^i = b^i(x, t) dt + sigma^i_k(x, t) o dw^k."""

    @property
    def b(self) -> tuple:
        return self.drift


@dataclass(frozen=True)
class FPCoefficients:
    """u_t = A^{ij} u_ij - B^i u_i - C u."""

    A: tuple
    B: tuple
    C: Expr
    consistency: ZeroResult | None = None

    def as_dict(self) -> dict:
        d = {
            "A": [[to_string(a) for a in row] for row in self.A],
            "B": [to_string(b) for b in self.B],
            "C": to_string(self.C),
        }
        if self.consistency is not None:
            d["divergence_form_check"] = self.consistency.as_dict()
        return d


def _xvar(i: int):
    return ("x", i)


def _wvar(k: int):
    return ("w", k)


def diffusion_matrix(sde: _SDEBase) -> list:
    """(sigma sigma^T)^{ij}, simplified."""
    n, m = sde.n, sde.m
    out = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            acc = ZERO
            for k in range(m):
                acc = add(acc, mul(sde.sigma[i][k], sde.sigma[j][k]))
            out[i][j] = out[j][i] = simplify(acc)
    return out


def ito_laplacian(sde: ItoSDE, F: Expr) -> Expr:
    """Delta F = sum_k F_{w_k w_k} + D^{ij} F_{x_i x_j} + 2 sigma^{jk} F_{x_j w_k}."""
    _check_context(sde, F)
    n, m = sde.n, sde.m
    D = diffusion_matrix(sde)
    acc = ZERO
    for k in range(1, m + 1):
        acc = add(acc, diff(diff(F, _wvar(k)), _wvar(k)))
    grad = [diff(F, _xvar(i)) for i in range(1, n + 1)]
    for i in range(n):
        for j in range(n):
            if D[i][j] != ZERO:
                acc = add(acc, mul(D[i][j], diff(grad[i], _xvar(j + 1))))
    for j in range(n):
        for k in range(m):
            s = sde.sigma[j][k]
            if s != ZERO:
                acc = add(acc, mul(mul(num(2), s), diff(grad[j], _wvar(k + 1))))
    return simplify(acc)


def ito_differential(sde: ItoSDE, F: Expr):
    """Coefficients of dF along the dynamics: ``(drift, [diffusion_k])``.

    drift = F_t + f^i F_{x_i} + Delta F / 2 and diffusion_k = F_{w_k} + sigma^i_k F_{x_i}.
    """
    _check_context(sde, F)
    n, m = sde.n, sde.m
    grad = [diff(F, _xvar(i)) for i in range(1, n + 1)]
    drift = diff(F, ("t", 0))
    for i in range(n):
        drift = add(drift, mul(sde.f[i], grad[i]))
    drift = add(drift, mul(num("1/2"), ito_laplacian(sde, F)))
    diffusion = []
    for k in range(m):
        acc = diff(F, _wvar(k + 1))
        for i in range(n):
            acc = add(acc, mul(sde.sigma[i][k], grad[i]))
        diffusion.append(simplify(acc))
    return simplify(drift), diffusion


def _correction(sde: _SDEBase) -> list:
    """(1/2) sum_{k,j} (d sigma^{ij} / d x^k) sigma^{kj} for each i."""
    n, m = sde.n, sde.m
    out = []
    for i in range(n):
        acc = ZERO
        for j in range(m):
            for k in range(n):
                d = diff(sde.sigma[i][j], _xvar(k + 1))
                if d != ZERO:
                    acc = add(acc, mul(d, sde.sigma[k][j]))
        out.append(mul(num("1/2"), acc))
    return out


def _copy_kw(sde: _SDEBase) -> dict:
    return {
        "constants": sde.constants,
        "name": sde.name,
        "var_names": sde.var_names,
        "sample_box": sde.sample_box,
        "notes": sde.notes,
    }


def ito_to_stratonovich(sde: ItoSDE) -> StratSDE:
    corr = _correction(sde)
    b = [simplify(sub(f, c)) for f, c in zip(sde.f, corr)]
    return StratSDE(tuple(b), sde.sigma, **_copy_kw(sde))


def stratonovich_to_ito(ssde: StratSDE) -> ItoSDE:
    corr = _correction(ssde)
    f = [simplify(add(b, c)) for b, c in zip(ssde.b, corr)]
    return ItoSDE(tuple(f), ssde.sigma, **_copy_kw(ssde))


# smooth positive test densities for the divergence-form comparison
_TEST_DENSITIES = ("exp(-(x1 - 1/2)^2/2 + t/3)", "exp(x1/3 - t)*(2 + sin(x1 + t))")


def _test_density(n: int, which: int) -> Expr:
    text = _TEST_DENSITIES[which]
    parts = []
    for i in range(1, n + 1):
        parts.append(text.replace("x1", f"(x{i}*{i})"))
    e = parse(" * ".join(f"({p})" for p in parts), (n, 0))
    return e


def fokker_planck_long(coeffs: FPCoefficients, u: Expr) -> Expr:
    n = len(coeffs.B)
    acc = ZERO
    for i in range(n):
        ui = diff(u, _xvar(i + 1))
        for j in range(n):
            acc = add(acc, mul(coeffs.A[i][j], diff(ui, _xvar(j + 1))))
        acc = sub(acc, mul(coeffs.B[i], ui))
    return sub(acc, mul(coeffs.C, u))


def fokker_planck_short(sde: ItoSDE, u: Expr) -> Expr:
    """(1/2) d_ij (D^{ij} u) - d_i (f^i u), expanded symbolically."""
    n = sde.n
    D = diffusion_matrix(sde)
    acc = ZERO
    for i in range(n):
        for j in range(n):
            acc = add(acc, mul(num("1/2"), diff(diff(mul(D[i][j], u), _xvar(i + 1)), _xvar(j + 1))))
        acc = sub(acc, diff(mul(sde.f[i], u), _xvar(i + 1)))
    return acc


def fokker_planck_coeffs(sde: ItoSDE, check: bool = True, tol: float = 1e-9) -> FPCoefficients:
    """Coefficients A, B, C of the forward equation.

    With ``check`` the long form is compared against the divergence form on
    two smooth test densities via :func:`is_zero`.
    """
    n = sde.n
    D = diffusion_matrix(sde)
    A = tuple(tuple(simplify(mul(num("1/2"), D[i][j])) for j in range(n)) for i in range(n))
    B = []
    for i in range(n):
        acc = sde.f[i]
        for j in range(n):
            acc = sub(acc, diff(D[i][j], _xvar(j + 1)))
        B.append(simplify(acc))
    C = ZERO
    for i in range(n):
        C = add(C, diff(sde.f[i], _xvar(i + 1)))
        for j in range(n):
            C = sub(C, mul(num("1/2"), diff(diff(D[i][j], _xvar(i + 1)), _xvar(j + 1))))
    coeffs = FPCoefficients(A, tuple(B), simplify(C))
    if check:
        results = []
        for which in range(len(_TEST_DENSITIES)):
            u = _test_density(n, which)
            diff_expr = sub(fokker_planck_long(coeffs, u), fokker_planck_short(sde, u))
            results.append(is_zero(diff_expr, sde.sample_box, tol, sde.constants, n, sde.m))
        coeffs = FPCoefficients(A, tuple(B), coeffs.C, combine(results))
    return coeffs


def is_autonomous(sde: _SDEBase) -> bool:
    return not any(depends_on(e, "t") for e in sde.coefficients())


def _check_context(sde: _SDEBase, F: Expr):
    for node in F.walk():
        if node.kind == "var":
            fam, idx = node.value
            if fam == "x" and idx > sde.n or fam == "w" and idx > sde.m:
                raise DimensionError(f"{fam}{idx} is outside the model context (n={sde.n}, m={sde.m})")


# ---- JSON documents ---------------------------------------------------


def parse_in(sde: _SDEBase, text: str) -> Expr:
    """Parse an expression in the context of ``sde``."""
    return parse(text, (sde.n, sde.m), sde.constants)


def model_from_dict(d: Mapping, kind: str = "ito") -> _SDEBase:
    try:
        n, m = int(d["n"]), int(d["m"])
        consts = {str(k): float(v) for k, v in (d.get("constants") or {}).items()}
        drift = [parse(str(s), (n, m), consts) for s in d["drift"]]
        rows = d["diffusion"]
        if len(rows) != n or any(len(r) != m for r in rows):
            raise DimensionError(f"diffusion must be {n} rows of {m} entries")
        sigma = [[parse(str(s), (n, m), consts) for s in row] for row in rows]
    except KeyError as exc:
        raise ModelFormatError(f"model document lacks field {exc.args[0]!r}") from None
    cls = StratSDE if (d.get("type", kind) == "stratonovich") else ItoSDE
    return cls(
        tuple(drift),
        tuple(tuple(r) for r in sigma),
        constants=consts,
        name=str(d.get("name", "")),
        var_names=tuple(d["var_names"]) if d.get("var_names") else None,
        sample_box=SampleDomain.from_dict(d.get("sample_box")),
        notes=str(d.get("notes", "")),
    )


def model_to_dict(sde: _SDEBase) -> dict:
    d = {
        "name": sde.name,
        "type": "stratonovich" if isinstance(sde, StratSDE) else "ito",
        "n": sde.n,
        "m": sde.m,
        "constants": dict(sde.constants),
        "drift": [to_string(e) for e in sde.drift],
        "diffusion": [[to_string(e) for e in row] for row in sde.sigma],
        "sample_box": sde.sample_box.as_dict(),
        "notes": sde.notes,
    }
    if sde.var_names:
        d["var_names"] = list(sde.var_names)
    return d


def load_model(path) -> _SDEBase:
    with open(Path(path), encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def make_sde(
    drift: Sequence[str],
    diffusion: Sequence[Sequence[str]],
    constants: Mapping[str, float] | None = None,
    **kw,
) -> ItoSDE:
    """Build an ItoSDE from expression strings."""
    d = {"n": len(drift), "m": len(diffusion[0]), "drift": drift, "diffusion": diffusion, "constants": constants or {}}
    sb = kw.pop("sample_box", None)
    if isinstance(sb, Mapping):
        d["sample_box"] = sb
    sde = model_from_dict(d)
    if isinstance(sb, SampleDomain):
        kw["sample_box"] = sb
    if kw:
        sde = ItoSDE(sde.drift, sde.sigma, **{**_copy_kw(sde), **kw})
    return sde
