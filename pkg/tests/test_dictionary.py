import numpy as np
import pytest

from sparsepde.dictionary import (Coefficients, RegressionSystem, build_system, dictionary_for,
                                  evaluate_rhs, render_pde, restrict_rows)
from sparsepde.grid import Field, SpaceTimeGrid
from sparsepde.identify import split_rows
from sparsepde.simulate import builtin_experiment
from sparsepde.smoothing import SmootherSpec, sdd


def test_1d_order():
    assert dictionary_for(1).names == ["1", "u", "u^2", "u_x", "u_x^2", "u*u_x", "u_xx",
                                       "u_xx^2", "u*u_xx", "u_x*u_xx"]


def test_2d_order():
    names = dictionary_for(2).names
    base = ["u", "u_x", "u_y", "u_xx", "u_xy", "u_yy"]
    pairs = []
    for i in range(6):
        for j in range(i, 6):
            pairs.append(base[i] + "^2" if i == j else f"{base[i]}*{base[j]}")
    assert names == ["1"] + base + pairs
    assert len(names) == 28 == 1 + 6 + 21


def test_coefficients_by_name_and_support():
    dic = dictionary_for(1)
    c = dic.coefficients({"u*u_x": -1.0, "u_xx": 0.1})
    assert c.support() == (5, 6)
    assert c.support_names() == ["u*u_x", "u_xx"]
    assert c.as_dict() == {"u*u_x": -1.0, "u_xx": 0.1}
    with pytest.raises(KeyError):
        dic.coefficients({"u_y": 1.0})
    with pytest.raises(ValueError):
        Coefficients(dic, np.zeros(3))
    with pytest.raises(ValueError):
        Coefficients(dic, np.full(10, np.inf))


def test_render_pde():
    dic = dictionary_for(1)
    assert render_pde(dic.coefficients(u_x=-1.0)) == "u_t = -1.0000*u_x"
    assert render_pde(dic.coefficients(u_x=-0.99941)) == "u_t = -0.9994*u_x"
    assert render_pde(dic.coefficients()) == "u_t = 0"
    c = dic.coefficients({"1": 0.5, "u*u_x": -1.0, "u_xx": 0.1013})
    assert render_pde(c) == "u_t = 0.5000 - 1.0000*u*u_x + 0.1013*u_xx"
    assert render_pde(c, precision=2) == "u_t = 0.50 - 1.00*u*u_x + 0.10*u_xx"


def toy_system():
    g = SpaceTimeGrid.from_spacing(1, 5, 2, 0.25, 0.1)
    v = np.random.default_rng(0).standard_normal(g.shape)
    d = sdd(Field(g, v), SmootherSpec("none"), [(0,), (1,), (2,)])
    return d, build_system(d, dictionary_for(1))


def test_build_system_matches_loop():
    d, sys_ = toy_system()
    g = sys_.grid
    u, ux, uxx = (d.spatial[k].values for k in ((0,), (1,), (2,)))
    r = 0
    for n in range(g.N):
        for i in range(g.M):
            row = [1, u[n, i], u[n, i] ** 2, ux[n, i], ux[n, i] ** 2, u[n, i] * ux[n, i],
                   uxx[n, i], uxx[n, i] ** 2, u[n, i] * uxx[n, i], ux[n, i] * uxx[n, i]]
            assert np.allclose(sys_.F[r], row, rtol=1e-12, atol=1e-12)
            assert sys_.b[r] == d.dt.values[n, i]
            assert sys_.row_index(r) == (n, i)
            r += 1
    assert sys_.n_rows == g.N * g.M


def test_build_system_2d_rows():
    g = SpaceTimeGrid.from_spacing(2, 5, 3, 0.25, 0.1)
    v = np.random.default_rng(1).standard_normal(g.shape)
    dic = dictionary_for(2)
    d = sdd(Field(g, v), SmootherSpec("none"), dic.required_bases())
    sys_ = build_system(d, dic)
    assert sys_.F.shape == (3 * 25, 28)
    assert np.all(sys_.F[:, 0] == 1)
    j = dic.index("u_x*u_yy")
    n, i1, i2 = sys_.row_index(37)
    assert sys_.F[37, j] == pytest.approx(d.spatial[(1, 0)].values[n, i1, i2]
                                          * d.spatial[(0, 2)].values[n, i1, i2])
    assert (n, i1, i2) == (1, 2, 2)


def test_missing_derivative():
    g = SpaceTimeGrid.from_spacing(1, 5, 2, 0.25, 0.1)
    d = sdd(Field(g, np.zeros(g.shape)), SmootherSpec("none"), [(0,)])
    with pytest.raises(KeyError):
        build_system(d, dictionary_for(1))


def test_margin_drops_border():
    d, full = toy_system()
    sys_ = build_system(d, dictionary_for(1), margin=1)
    assert sys_.n_rows == 2 * 3
    assert [full.row_index(r)[1] for r in sys_.rows] == [1, 2, 3] * 2
    assert np.array_equal(sys_.F, full.F[sys_.rows])


def test_restrict_rows():
    _, sys_ = toy_system()
    same = restrict_rows(sys_, np.arange(sys_.n_rows))
    assert np.array_equal(same.F, sys_.F) and np.array_equal(same.b, sys_.b)
    part = restrict_rows(sys_, [7, 2, 3])
    assert np.array_equal(part.b, sys_.b[[7, 2, 3]])
    with pytest.raises(IndexError):
        restrict_rows(sys_, [sys_.n_rows])


def test_split_count():
    t1, t2 = split_rows(12800, 1 / 200)
    assert t1.size == 64 and t1.size + t2.size == 12800
    assert np.array_equal(t1, np.arange(64))


def test_transport_residual_small_and_shrinks():
    exp = builtin_experiment("transport")
    res = []
    for stride in (2, 1):
        from sparsepde.simulate import downsample
        data = downsample(exp.clean(), stride, 1)
        d = sdd(data, SmootherSpec("none"), [(0,), (1,), (2,)])
        sys_ = build_system(d, dictionary_for(1))
        r = sys_.F @ exp.truth.values - sys_.b
        res.append(np.sqrt(np.mean(r**2)))
        assert res[-1] < 0.05 * np.sqrt(np.mean(sys_.b**2))
    assert res[1] < res[0]


def test_scaled_system():
    _, sys_ = toy_system()
    assert np.array_equal(sys_.scaled(-2).b, -2 * sys_.b)
    with pytest.raises(ValueError):
        RegressionSystem(sys_.F[:, :3], sys_.b, sys_.grid, sys_.dictionary)


def test_evaluate_rhs():
    dic = dictionary_for(1)
    x = np.linspace(0, 1, 21)
    u = x**2
    rhs = evaluate_rhs(dic.coefficients({"1": 1.0, "u*u_x": 2.0}), u, x[1] - x[0])
    assert np.allclose(rhs, 1 + 2 * u * 2 * x, atol=1e-12)
    assert np.array_equal(evaluate_rhs(dic.coefficients(), u, 0.05), np.zeros_like(u))
