import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stringwave.errors import ChartDomainExceeded, DegeneratePoint, PointOffManifold
from stringwave.geometry import (
    EuclideanChart,
    StereographicChart,
    christoffel,
    flat3,
    make_target,
    sphere2,
    sphere3,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def vec(q):
    return arrays(np.float64, (q,), elements=finite)


def nonzero(q):
    return vec(q).filter(lambda v: np.linalg.norm(v) > 1e-3)


# --- examples --------------------------------------------------------------


@pytest.mark.parametrize(
    "m, x, expected",
    [
        (sphere3(), [2, 0, 0, 0], [1, 0, 0, 0]),
        (flat3(), [0.3, -1, 2], [0.3, -1, 2]),
        (sphere3(), [1, 1, 0, 0], [2**-0.5, 2**-0.5, 0, 0]),
    ],
)
def test_project_point_examples(m, x, expected):
    out = m.project_point(x)
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_project_point_origin_of_sphere_is_degenerate():
    with pytest.raises(DegeneratePoint):
        sphere3().project_point([0, 0, 0, 0])


@pytest.mark.parametrize(
    "p, w, expected",
    [([1, 0, 0, 0], [5, 1, 0, 0], [0, 1, 0, 0]), ([1, 0, 0, 0], [0, 0, 2, 0], [0, 0, 2, 0])],
)
def test_project_tangent_examples(p, w, expected):
    np.testing.assert_allclose(sphere3().project_tangent(p, w), expected, atol=1e-15)


def test_project_tangent_flat_is_identity(rng):
    w = rng.standard_normal(3)
    np.testing.assert_array_equal(flat3().project_tangent(rng.standard_normal(3), w), w)


def test_project_tangent_rejects_points_off_target():
    with pytest.raises(PointOffManifold):
        sphere3().project_tangent([1.1, 0, 0, 0], [0, 1, 0, 0])


def test_second_fundamental_form_examples():
    m = sphere3()
    p = [1.0, 0, 0, 0]
    np.testing.assert_allclose(m.second_fundamental_form(p, [0, 1, 0, 0], [0, 1, 0, 0]), [-1, 0, 0, 0])
    np.testing.assert_allclose(m.second_fundamental_form(p, [0, 1, 0, 0], [0, 0, 1, 0]), 0.0)
    np.testing.assert_array_equal(flat3().second_fundamental_form([1, 2, 3], [1, 0, 0], [0, 4, 1]), 0.0)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_second_fundamental_form_matches_curve_acceleration(r):
    # the great circle p cos s + w sin s has acceleration -p, the normal part II(w', w')
    m = sphere3(r)
    p = np.array([r, 0, 0, 0])
    w = np.array([0, 0.6, 0.8, 0])
    s = 1e-4

    def curve(t):
        return m.project_point(p + t * w)

    acc = (curve(s) - 2 * curve(0) + curve(-s)) / s**2
    np.testing.assert_allclose(acc, m.second_fundamental_form(p, w, w), atol=1e-6)


def test_make_target_names():
    assert make_target("sphere3", 2.0).name == "sphere3"
    assert make_target("sphere2").ambient_dim == 3
    assert make_target("flat3").intrinsic_dim == 3
    with pytest.raises(ValueError):
        make_target("torus")


# --- properties --------------------------------------------------------------


@given(x=nonzero(4), r=st.floats(0.1, 10))
def test_sphere_projection_idempotent_and_on_sphere(x, r):
    m = sphere3(r)
    p = m.project_point(x)
    assert abs(np.linalg.norm(p) - r) <= 1e-12 * r
    np.testing.assert_allclose(m.project_point(p), p, atol=1e-14 * r)


@given(scale=st.floats(-6, 6), direction=nonzero(4))
def test_projection_accuracy_over_magnitudes(scale, direction):
    x = direction / np.linalg.norm(direction) * 10.0**scale
    assert abs(np.linalg.norm(sphere3().project_point(x)) - 1.0) <= 1e-12


@given(x=nonzero(4), w=vec(4), a=finite, b=finite, w2=vec(4))
def test_project_tangent_linear_idempotent_orthogonal(x, w, a, b, w2):
    m = sphere3()
    p = m.project_point(x)
    t = m.project_tangent(p, w)
    np.testing.assert_allclose(m.project_tangent(p, t), t, atol=1e-12 * (1 + np.abs(w).max()))
    assert abs(t @ p) <= 1e-12 * (1 + np.abs(w).max())
    lin = m.project_tangent(p, a * w + b * w2) - a * t - b * m.project_tangent(p, w2)
    assert np.abs(lin).max() <= 1e-10 * (1 + abs(a) + abs(b)) * (1 + np.abs(w).max() + np.abs(w2).max())


def test_second_fundamental_form_is_normal_on_random_frames(rng):
    m = sphere3()
    p = m.project_point(rng.standard_normal((100, 4)))
    w1, w2 = (m.project_tangent(p, rng.standard_normal((100, 4))) for _ in range(2))
    ii = m.second_fundamental_form(p, w1, w2)
    for _ in range(100):
        t = m.project_tangent(p, rng.standard_normal((100, 4)))
        assert np.abs(np.sum(ii * t, axis=-1)).max() <= 1e-10
    np.testing.assert_allclose(ii, m.second_fundamental_form(p, w2, w1), atol=0)


# --- charts --------------------------------------------------------------------


def test_euclidean_christoffel_vanishes(rng):
    y = 0.5 * rng.uniform(-1, 1, (10, 3))
    np.testing.assert_array_equal(christoffel(EuclideanChart(3), y), 0.0)


def test_stereographic_christoffel_vanishes_at_origin():
    np.testing.assert_allclose(christoffel(StereographicChart(3), np.zeros(3)), 0.0, atol=1e-15)


def _symbolic_christoffel(y0, r):
    ys = sp.symbols("y0:3")
    s = sum(v**2 for v in ys)
    g = sp.eye(3) * 4 * r**2 / (1 + s) ** 2
    ginv = g.inv()
    gam = np.zeros((3, 3, 3))
    subs = dict(zip(ys, y0))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                expr = sum(
                    ginv[i, l] * (sp.diff(g[k, l], ys[j]) + sp.diff(g[j, l], ys[k]) - sp.diff(g[j, k], ys[l]))
                    for l in range(3)
                ) / 2
                gam[i, j, k] = float(expr.subs(subs))
    return gam


@pytest.mark.parametrize("r", [1.0, 1.7])
def test_stereographic_christoffel_matches_symbolic(r):
    y0 = [0.3, -0.2, 0.5]
    np.testing.assert_allclose(christoffel(StereographicChart(3, r), np.array(y0)), _symbolic_christoffel(y0, r),
                               atol=1e-13)


def test_christoffel_fd_converges_at_second_order():
    chart = StereographicChart(3)
    y = np.array([0.4, -0.3, 0.2])
    exact = christoffel(chart, y)
    errs = [np.abs(christoffel(chart, y, analytic=False, h=h) - exact).max() for h in (1e-2, 5e-3)]
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert np.abs(christoffel(chart, y, analytic=False) - exact).max() < 1e-8


@given(y=arrays(np.float64, (3,), elements=st.floats(-0.57, 0.57)))
def test_christoffel_symmetric_lower_indices(y):
    gam = christoffel(StereographicChart(3), y)
    np.testing.assert_allclose(gam, np.swapaxes(gam, -1, -2), atol=1e-14)


def test_christoffel_outside_domain_raises():
    with pytest.raises(ChartDomainExceeded):
        christoffel(StereographicChart(3), np.array([1.0, 1.0, 0.0]))


@pytest.mark.parametrize("r", [1.0, 2.5])
def test_stereographic_ellipticity_constant(r):
    chart = StereographicChart(3, r)
    assert chart.ellipticity() == pytest.approx(r, rel=1e-12)
    # a >= r on a deterministic grid of the unit ball
    g1 = np.linspace(-1, 1, 11)
    ys = np.array(np.meshgrid(g1, g1, g1)).reshape(3, -1).T
    ys = ys[np.linalg.norm(ys, axis=1) <= 1]
    assert np.linalg.eigvalsh(chart.metric(ys)).min() >= r**2 * (1 - 1e-12)


@given(y=arrays(np.float64, (3,), elements=st.floats(-0.57, 0.57)), r=st.floats(0.2, 5))
def test_stereographic_embedding_consistency(y, r):
    chart = StereographicChart(3, r)
    p = chart.embed(y)
    assert abs(np.linalg.norm(p) - r) <= 1e-12 * r
    np.testing.assert_allclose(chart.from_ambient(p), y, atol=1e-12)
    J = chart.embed_jacobian(y)
    np.testing.assert_allclose(J.T @ J, chart.metric(y), atol=1e-12 * r**2)
    K = chart.from_ambient_jacobian(p)
    np.testing.assert_allclose(K @ J, np.eye(3), atol=1e-12)


def test_embed_jacobian_matches_finite_differences():
    chart = StereographicChart(2, 1.3)
    y = np.array([0.2, -0.4])
    h = 1e-6
    fd = np.column_stack([(chart.embed(y + h * e) - chart.embed(y - h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(chart.embed_jacobian(y), fd, atol=1e-9)


def test_sphere2_default_chart():
    chart = sphere2().default_chart()
    assert chart.n == 2 and chart.ambient_dim == 3
    np.testing.assert_allclose(chart.embed(np.zeros(2)), [0, 0, 1])
