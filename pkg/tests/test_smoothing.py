import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsepde.differentiation import eno5_first_derivative
from sparsepde.grid import Field, SpaceTimeGrid
from sparsepde.smoothing import (SmootherSpec, SmoothingWarning, diffusion_smooth, mls_operator,
                                 mls_smooth, moving_average, sdd, smooth_1d, smooth_space,
                                 smooth_time)

SPECS = [SmootherSpec(), SmootherSpec("moving-average", window=5), SmootherSpec("diffusion"),
         SmootherSpec("none")]


def test_spec_validation():
    for bad in (dict(kind="spline"), dict(h=0), dict(window=4), dict(steps=-1), dict(h_t=-1.0)):
        with pytest.raises(ValueError):
            SmootherSpec(**bad)
    assert SmootherSpec().time_bandwidth == 0.04
    assert SmootherSpec(h_t=0.5).time_bandwidth == 0.5


@pytest.mark.parametrize("M", [7, 50, 257])
def test_reproduces_quadratic(M):
    x = np.linspace(-0.3, 2.0, M)
    q = 1 + 2 * x - 3 * x**2
    # bandwidths below about two grid spacings leave boundary nodes without
    # three effective points; those take the weighted-mean fallback instead
    for h in [h for h in (0.01, 0.04, 0.1, 1.0, 10.0) if h >= 2 * (x[1] - x[0])]:
        with warnings.catch_warnings():
            warnings.simplefilter("error", SmoothingWarning)
            s = mls_smooth(q, x[1] - x[0], h)
        assert np.max(np.abs(s - q)) <= 1e-10 * np.max(np.abs(q))


def test_single_node_dense_oracle():
    rng = np.random.default_rng(0)
    x = np.linspace(0, 1, 41)
    u = rng.standard_normal(41)
    h, j = 0.05, 17
    w = np.exp(-((x - x[j]) ** 2) / h**2)
    V = np.vander(x - x[j], 3, increasing=True)
    coef = np.linalg.solve(V.T @ (w[:, None] * V), V.T @ (w * u))
    assert mls_smooth(u, x[1] - x[0], h)[j] == pytest.approx(coef[0], rel=1e-9)


def test_boundary_dense_oracle():
    rng = np.random.default_rng(1)
    x = np.linspace(0, 1, 41)
    u = rng.standard_normal(41)
    h = 0.08
    s = mls_smooth(u, x[1] - x[0], h)
    for j in (0, 1, 40):
        w = np.exp(-((x - x[j]) ** 2) / h**2)
        V = np.vander(x - x[j], 3, increasing=True)
        coef = np.linalg.solve(V.T @ (w[:, None] * V), V.T @ (w * u))
        assert s[j] == pytest.approx(coef[0], rel=1e-8)


def test_degenerate_falls_back_with_warning():
    with pytest.warns(SmoothingWarning):
        S = mls_operator(9, 1.0, 0.1)
    assert np.allclose(S.toarray(), np.eye(9))
    with pytest.raises(ValueError):
        mls_operator(2, 1.0, 0.1)


def test_denoises_sine():
    x = np.linspace(0, 2 * np.pi, 257)
    u = np.sin(x) + 0.007 * np.random.default_rng(3).standard_normal(257)
    s = mls_smooth(u, x[1] - x[0], 0.04)
    assert np.linalg.norm(s - np.sin(x)) < np.linalg.norm(u - np.sin(x))


def test_identity_settings():
    u = np.random.default_rng(4).standard_normal(20)
    assert np.array_equal(moving_average(u, 1), u)
    assert np.array_equal(diffusion_smooth(u, 0), u)
    assert np.array_equal(smooth_1d(u, 0.1, SmootherSpec("none")), u)


def test_moving_average_values():
    assert np.allclose(moving_average(np.array([0., 3, 6, 9, 12]), 3), [1.5, 3, 6, 9, 10.5])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-4, 4), st.sampled_from(SPECS))
def test_linear(seed, a, spec):
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, 30))
    lhs = smooth_1d(a * u + v, 0.02, spec)
    rhs = a * smooth_1d(u, 0.02, spec) + smooth_1d(v, 0.02, spec)
    assert np.allclose(lhs, rhs, atol=1e-10)


def grid2d():
    return SpaceTimeGrid.from_spacing(2, 21, 2, 0.05, 0.1)


def test_smooth_space_constant_in_y():
    g = grid2d()
    X, _ = g.mesh()
    v = np.stack([np.sin(7 * X) + 0.1 * np.cos(31 * X)] * 3)
    out = smooth_space(Field(g, v), SmootherSpec(h=0.1)).values
    ref = mls_smooth(v[:, :, 0], g.dx, 0.1)
    assert np.allclose(out, ref[:, :, None], atol=1e-12)


def test_smooth_space_separable():
    g = grid2d()
    x = g.coordinates()
    rng = np.random.default_rng(5)
    a, b = rng.standard_normal((2, x.size))
    v = np.stack([np.outer(a, b)] * 3)
    out = smooth_space(Field(g, v), SmootherSpec(h=0.1)).values[0]
    assert np.allclose(out, np.outer(mls_smooth(a, g.dx, 0.1), mls_smooth(b, g.dx, 0.1)), atol=1e-12)


def test_kind_none_identity():
    f = Field(grid2d(), np.random.default_rng(6).standard_normal(grid2d().shape))
    assert smooth_space(f, SmootherSpec("none")) == f
    assert smooth_time(f, SmootherSpec("none")) == f


def test_smooth_time_uses_time_bandwidth():
    g = SpaceTimeGrid.from_spacing(1, 5, 40, 0.25, 0.01)
    v = np.random.default_rng(7).standard_normal(g.shape)
    out = smooth_time(Field(g, v), SmootherSpec(h=0.03, h_t=0.05)).values
    assert np.allclose(out[:, 2], mls_smooth(v[:, 2], g.dt, 0.05))


def test_sdd_none_is_plain_differentiation():
    g = SpaceTimeGrid.from_spacing(1, 33, 4, 1 / 32, 0.01)
    v = np.random.default_rng(8).standard_normal(g.shape)
    d = sdd(Field(g, v), SmootherSpec("none"), [(1,), (2,)])
    ux = eno5_first_derivative(v, g.dx)
    assert np.array_equal(d.base((1,)).values, ux)
    assert np.array_equal(d.base((2,)).values, eno5_first_derivative(ux, g.dx))
    assert np.allclose(d.dt.values, np.diff(v, axis=0) / g.dt)
    with pytest.raises(KeyError):
        d.base((0,))


def test_sdd_order_of_operations():
    g = SpaceTimeGrid.from_spacing(1, 65, 30, 1 / 64, 0.01)
    v = np.random.default_rng(9).standard_normal(g.shape)
    s = SmootherSpec(h=0.05)
    d = sdd(Field(g, v), s, [(2,)])
    S = lambda a: mls_smooth(a, g.dx, 0.05)
    D = lambda a: eno5_first_derivative(a, g.dx)
    assert np.allclose(d.base((2,)).values, S(D(S(D(S(v))))), atol=1e-10)
    St = mls_smooth(np.diff(S(v), axis=0).T / g.dt, g.dt, 0.05).T
    assert np.allclose(d.dt.values, St, atol=1e-8)


def test_sdd_quadratic_second_derivative():
    g = SpaceTimeGrid.from_spacing(1, 101, 3, 0.01, 0.1)
    x = g.coordinates()
    v = np.stack([3 * x**2 - x + 1] * 4)
    d = sdd(Field(g, v), SmootherSpec(), [(2,)])
    assert np.allclose(d.base((2,)).values[:, 5:-5], 6.0, rtol=1e-8)


def test_sdd_mixed_partial_lower_axis_first():
    g = SpaceTimeGrid.from_spacing(2, 21, 3, 0.05, 0.1)
    v = np.random.default_rng(10).standard_normal(g.shape)
    s = SmootherSpec(h=0.1)
    d = sdd(Field(g, v), s, [(1, 1)])
    from sparsepde.smoothing import smooth_space_values
    from sparsepde.differentiation import derivative_along
    S = lambda a: smooth_space_values(a, 2, g.dx, s)
    ref = S(derivative_along(S(derivative_along(S(v), 1, g.dx)), 2, g.dx))
    assert np.allclose(d.base((1, 1)).values, ref, atol=1e-10)


def test_mixed_partial_symmetry_under_refinement():
    # u_xy and u_yx differ by smoothing bias, so h is refined along with dx
    gaps = []
    for M in (41, 81, 161):
        g = SpaceTimeGrid.from_spacing(2, M, 3, 1 / (M - 1), 0.1)
        X, Y = g.mesh()
        v = np.stack([np.sin(2 * X + 1) * np.cos(3 * Y)] * 4)
        s = SmootherSpec(h=2.5 * g.dx, h_t=1.0)
        dxy = sdd(Field(g, v), s, [(1, 1)]).base((1, 1)).values[0]
        # u_yx: transpose, apply the same lower-axis-first rule, transpose back
        vt = Field(g, np.swapaxes(v, 1, 2))
        dyx = np.swapaxes(sdd(vt, s, [(1, 1)]).base((1, 1)).values[0], 0, 1)
        gaps.append(np.max(np.abs(dxy - dyx)))
    assert gaps[1] < gaps[0] / 3 and gaps[2] < gaps[1] / 3


def test_sdd_rejects_high_order():
    g = SpaceTimeGrid.from_spacing(1, 9, 2, 0.125, 0.1)
    with pytest.raises(ValueError):
        sdd(Field(g, np.zeros(g.shape)), SmootherSpec(), [(3,)])
