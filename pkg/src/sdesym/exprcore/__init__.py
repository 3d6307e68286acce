"""Symbolic expression substrate: trees, parsing, evaluation, calculus, simplification."""

from .calculus import as_var, diff, gradient, substitute
from .evaluate import Binding, Compiled, DomainError, UnboundConstant, compile_exprs, evaluate, evaluate_vectorized
from .expr import (
    ONE,
    T,
    ZERO,
    Expr,
    W,
    X,
    atan,
    const,
    constants_used,
    cos,
    depends_on,
    exp,
    free_vars,
    log,
    num,
    sin,
    size,
    sqrt,
    tan,
    var,
)
from .parser import Context, ParseError, parse
from .printer import format_number, to_string
from .simplify import divide, expand_terms, has_factor, simplify
from .zero import (
    DEFAULT_TOL,
    InsufficientSamples,
    SampleDomain,
    ZeroResult,
    ZeroStatus,
    combine,
    is_zero,
    sample_values,
)

__all__ = [
    "Binding",
    "Compiled",
    "Context",
    "DEFAULT_TOL",
    "DomainError",
    "Expr",
    "InsufficientSamples",
    "ONE",
    "ParseError",
    "SampleDomain",
    "T",
    "UnboundConstant",
    "W",
    "X",
    "ZERO",
    "ZeroResult",
    "ZeroStatus",
    "as_var",
    "atan",
    "combine",
    "compile_exprs",
    "const",
    "constants_used",
    "cos",
    "depends_on",
    "diff",
    "divide",
    "evaluate",
    "evaluate_vectorized",
    "exp",
    "expand_terms",
    "format_number",
    "free_vars",
    "gradient",
    "has_factor",
    "is_zero",
    "log",
    "num",
    "parse",
    "sample_values",
    "simplify",
    "sin",
    "size",
    "sqrt",
    "substitute",
    "tan",
    "to_string",
    "var",
]
