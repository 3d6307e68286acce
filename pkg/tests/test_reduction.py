import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdesym.catalog import load_entry
from sdesym.exprcore import Binding, evaluate, is_zero, parse
from sdesym.exprcore.expr import sub
from sdesym.model import make_sde
from sdesym.reduction import (
    GridMismatch,
    NonSeparable,
    Transform,
    TransformError,
    adapted_coordinate_1d,
    adapted_inverse_1d,
    adapted_transform_1d,
    change_variables,
    push_forward,
    reconstruct,
    separate_1d,
    transform_from_dict,
)
from sdesym.sim.wiener import sample_wiener, uniform_grid
from sdesym.symmetry import SimpleVectorField


def Y(sde, text):
    return parse(text, (sde.n, sde.m), sde.constants, state_symbol="y")


def same(a, b, sde, box=None):
    return is_zero(sub(a, b), box or sde.sample_box, 1e-9, sde.constants, sde.n, sde.m).is_zero


def test_gbm_log_transform():
    e = load_entry("gbm")
    sde = e.model()
    T = transform_from_dict({"forward": ["log(x1)"], "inverse": ["exp(y1)"]}, sde)
    ts = change_variables(sde, T)
    assert same(ts.drift[0], Y(sde, "alpha - beta^2/2"), sde)
    assert same(ts.diffusion[0][0], Y(sde, "beta"), sde)
    assert ts.is_ito and ts.ito_status.value == "SymbolicZero"
    X = SimpleVectorField((parse("x1", (1, 1)),), None, 1)
    assert same(push_forward(X, T).phi[0], parse("1", (1, 1)), sde)


def test_logistic_transform_not_ito():
    e = load_entry("logistic")
    sde = e.model()
    spec = e.transform_specs()[0]
    ts = change_variables(sde, e.transform(sde, spec))
    assert same(ts.drift[0], e.parse_y(sde, "-beta*exp(A*t + gamma*w1)"), sde)
    assert ts.diffusion[0][0].kind == "num" and ts.diffusion[0][0].value == 0
    assert not ts.is_ito and ts.ito_status.value == "NonZero"
    assert ts.w_dependent
    with pytest.raises(TransformError):
        ts.to_sde()


def test_gl2dim_triangular_system():
    e = load_entry("gl2dim")
    sde = e.model()
    spec = e.transform_specs()[0]
    T = e.transform(sde, spec)
    ts = change_variables(sde, T)
    want_f = [Y(sde, "y1^2"), Y(sde, "-y1")]
    want_s = [[Y(sde, "1"), Y(sde, "0")], [Y(sde, "y1"), Y(sde, "1")]]
    for a, b in zip(ts.drift, want_f):
        assert same(a, b, sde, T.y_box)
    for ra, rb in zip(ts.diffusion, want_s):
        for a, b in zip(ra, rb):
            assert same(a, b, sde, T.y_box)
    assert ts.is_ito
    Z = push_forward(e.fields(sde)["X"], T)
    assert same(Z.phi[0], Y(sde, "0"), sde, T.y_box) and same(Z.phi[1], Y(sde, "1"), sde, T.y_box)


def test_identity_transform_keeps_model():
    sde = make_sde(["a*x1*(1 - x1)"], [["s*x1"]], {"a": 1.0, "s": 0.3})
    ts = change_variables(sde, transform_from_dict({"forward": ["x1"], "inverse": ["y1"]}, sde))
    assert same(ts.drift[0], sde.drift[0], sde) and same(ts.diffusion[0][0], sde.sigma[0][0], sde)


def test_bad_inverse_rejected():
    sde = make_sde(["x1"], [["x1"]])
    T = transform_from_dict({"forward": ["log(x1)"], "inverse": ["exp(2*y1)"]}, sde)
    assert T.round_trip_error() > 1e-3
    with pytest.raises(TransformError):
        change_variables(sde, T)


def test_transform_dimension_checked():
    with pytest.raises(TransformError):
        Transform((parse("x1", (1, 1)),), (), 1, 1)


# ---- adapted coordinates --------------------------------------------------


phis = st.tuples(
    st.sampled_from(["1", "2", "x1", "x1^2", "x1^(-1)", "3*x1^(1/2)", "exp(x1)", "exp(-x1/2)", "x1*exp(t)", "exp(w1 + x1)"]),
)


@settings(max_examples=30, deadline=None)
@given(phis, st.floats(0.3, 2.0), st.floats(0.1, 1.5), st.floats(-0.8, 0.8))
def test_adapted_coordinate_straightens(p, x, t, w):
    phi = parse(p[0], (1, 1))
    u = adapted_coordinate_1d(phi)
    X = SimpleVectorField((phi,), None, 1)
    b = Binding(t, (x,), (w,))
    assert math.isclose(evaluate(X.apply(u), b), 1.0, rel_tol=1e-9)
    inv = adapted_inverse_1d(phi)
    y = evaluate(u, b)
    assert math.isclose(evaluate(inv, Binding(t, (y,), (w,))), x, rel_tol=1e-9)


def test_separate_1d():
    g, k, a = separate_1d(parse("3*x1^2*exp(t)", (1, 1)))
    assert k == 2 and a == 0
    assert evaluate(g, Binding(0.0, (1.0,), (0.0,))) == 3.0
    with pytest.raises(NonSeparable):
        separate_1d(parse("x1 + x1^2", (1, 1)))
    with pytest.raises(NonSeparable):
        separate_1d(parse("x1*exp(x1)", (1, 1)))


def test_adapted_transform_gbm():
    e = load_entry("gbm")
    sde = e.model()
    T = adapted_transform_1d(SimpleVectorField((parse("x1", (1, 1)),), None, 1), sde)
    ts = change_variables(sde, T)
    assert ts.is_ito and same(ts.drift[0], Y(sde, "alpha - beta^2/2"), sde)


# ---- reconstruction ---------------------------------------------------------


def test_reconstruct_sums():
    path = sample_wiener(1, uniform_grid(1.0, 64), 3)
    y = reconstruct(path, 2.0, [0.5], 1.0)
    w = path.cumulative()[:, 0]
    assert np.allclose(y, 1.0 + 2.0 * path.grid + 0.5 * w, atol=1e-13)


def test_reconstruct_left_endpoint():
    path = sample_wiener(1, uniform_grid(1.0, 32), 1)
    y = reconstruct(path, 0.0, [path.grid], 0.0)
    want = np.concatenate([[0.0], np.cumsum(path.grid[:-1] * path.increments[:, 0])])
    assert np.array_equal(y, want)


def test_reconstruct_grid_mismatch():
    path = sample_wiener(1, uniform_grid(1.0, 16), 0)
    with pytest.raises(GridMismatch):
        reconstruct(path, np.ones(5), [], 0.0)
    with pytest.raises(GridMismatch):
        reconstruct(path, 0.0, [1.0, 2.0], 0.0)


def test_logistic_reconstruction_solves_model():
    # the straightened coordinate is a pure quadrature; mapping it back matches a fine EM run
    from sdesym.catalog.exact import logistic
    from sdesym.sim import em_ensemble

    e = load_entry("logistic")
    sde = e.model()
    grid = uniform_grid(1.0, 2**12)
    path = sample_wiener(1, grid, 5)
    dW = path.increments[:, :, None]
    exact = logistic(sde.constants)(grid, dW, np.array([0.5]))[:, 0, 0]
    em = em_ensemble(sde, [0.5], grid, dW)[:, 0, 0]
    assert np.max(np.abs(exact - em)) < 0.02
