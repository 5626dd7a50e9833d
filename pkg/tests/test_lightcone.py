import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stringwave import lightcone as lc
from stringwave.errors import InsufficientSamples, NoConvergence, WindowExhausted
from stringwave.extrinsic import GridSpec, solve
from stringwave.geometry import EuclideanChart, StereographicChart, flat3, sphere3
from stringwave.potentials import TwoFormPotential
from stringwave.presets import make_initial_data
from stringwave.runner import lightcone_data
from stringwave.scenarios import load_scenario

ZERO = TwoFormPotential()
FLAT_B = TwoFormPotential("constant_volume3", 1.0)


def flat_data(eps, L, phi1=None):
    def phi0(x):
        out = np.zeros((np.size(x), 3))
        out[:, 0] = eps * np.sin(x)
        return out

    def vel(x):
        return np.tile(phi1 if phi1 is not None else np.zeros(3), (np.size(x), 1))

    return lc.CauchyData(phi0, vel, L)


def sphere_small():
    cfg = load_scenario("sphere3_small")
    return lightcone_data(cfg)


# --- initial data ---------------------------------------------------------------------


def test_constant_data_gives_constant_solution():
    p = np.array([0.1, -0.2, 0.3])
    data = lc.CauchyData(lambda x: np.tile(p, (np.size(x), 1)), lambda x: np.zeros((np.size(x), 3)), 1.0)
    chart = StereographicChart(3)
    params = lc.compute_bounds(data, chart)
    # the fourth-order difference of a constant is zero up to round-off
    assert params.M < 1e-12 and params.k == 1.0
    grid = lc.TriangleGrid.triangle(0.5, 16)
    sol = lc.solve_triangle(lc.to_characteristic_data(data, grid, chart), chart, TwoFormPotential("sphere3_volume", 1))
    st_ = sol.state
    mask = grid.mask()
    np.testing.assert_allclose(st_.y[mask], np.broadcast_to(p, st_.y[mask].shape), atol=1e-15)
    np.testing.assert_allclose(st_.z[mask], np.broadcast_to(p, st_.z[mask].shape), atol=1e-15)
    assert np.abs(st_.u[mask]).max() < 1e-12 and np.abs(st_.v[mask]).max() < 1e-12
    assert sol.deltas[-1] < 1e-12


def test_sine_data_lightcone_derivatives():
    eps = 0.1
    grid = lc.TriangleGrid.triangle(1.0, 32)
    state = lc.to_characteristic_data(flat_data(eps, 2.0), grid)
    y, z, u, v = state.base()
    x = grid.base_x
    np.testing.assert_allclose(u[:, 0], eps * np.cos(x), atol=1e-8)
    np.testing.assert_allclose(v[:, 0], -eps * np.cos(x), atol=1e-8)
    np.testing.assert_allclose(y[:, 0], eps * np.sin(x))
    np.testing.assert_array_equal(y, z)


def test_pure_velocity_data():
    w = np.array([0.2, -0.1, 0.05])
    grid = lc.TriangleGrid.triangle(0.5, 8)
    state = lc.to_characteristic_data(flat_data(0.0, 1.0, w), grid)
    _, _, u, v = state.base()
    np.testing.assert_allclose(u, np.broadcast_to(w, u.shape))
    np.testing.assert_allclose(v, np.broadcast_to(w, v.shape))


def test_one_sided_derivative_near_window_edge():
    f = lambda s: np.sin(s)[:, None]
    x = np.linspace(-1, 1, 21)
    d = lc.derivative4(f, x, 0.05, 1.0)
    np.testing.assert_allclose(d[:, 0], np.cos(x), atol=1e-5)


def test_insufficient_samples():
    grid = lc.TriangleGrid.triangle(1.5, 8)
    with pytest.raises(InsufficientSamples):
        lc.to_characteristic_data(flat_data(0.1, 1.0), grid)


# --- triangle size --------------------------------------------------------------


def test_triangle_size_example():
    assert lc.triangle_size(1.0, 2.0, 3, 10.0) == pytest.approx(0.144338, abs=1e-6)
    assert lc.triangle_size(1.0, 0.0, 3, 10.0) == 10.0
    assert lc.triangle_size(1.0, 1e-6, 3, 10.0) == 10.0


@given(a=st.floats(0.1, 10), M=st.floats(1e-3, 10), s=st.floats(0.1, 10), n=st.sampled_from([2, 3]))
def test_triangle_size_homogeneity(a, M, s, n):
    L = 1e9
    assert lc.triangle_size(s * a, s * M, n, L) == pytest.approx(lc.triangle_size(a, M, n, L), rel=1e-12)
    assert lc.triangle_size(a, s * M, n, L) == pytest.approx(lc.triangle_size(a, M, n, L) / s, rel=1e-12)


def test_compute_bounds_flat_sine():
    eps = 0.1
    params = lc.compute_bounds(flat_data(eps, 2.0), EuclideanChart(3))
    assert params.a == pytest.approx(1.0)
    assert params.M == pytest.approx(eps, rel=1e-6)
    assert params.k == pytest.approx(min(2.0, 1 / (2 * eps * math.sqrt(3))))


# --- grid bookkeeping -----------------------------------------------------------------


def test_triangle_grid_geometry():
    g = lc.TriangleGrid.triangle(1.0, 4)
    assert g.k == pytest.approx(1.0) and g.n_char == 4
    np.testing.assert_allclose(g.base_x, np.linspace(-1, 1, 5))
    assert g.mask().sum() == 15
    t, x = g.tx(4, 0)
    assert t == pytest.approx(1.0) and x == pytest.approx(0.0)
    i, j = g.level(2)
    assert len(i) == 3
    for ii, jj in zip(i, j):
        assert g.tx(ii, jj)[0] == pytest.approx(0.5)
    assert np.all(np.diff(g.xi) > 0) and np.all(np.diff(g.eta) < 0)


# --- Picard iteration -----------------------------------------------------------------


def test_flat_zero_form_exact_after_one_sweep():
    chart = EuclideanChart(3)
    grid = lc.TriangleGrid.triangle(1.0, 32)
    sol = lc.solve_triangle(lc.to_characteristic_data(flat_data(0.1, 2.0), grid), chart, ZERO)
    # u and v are constant along their transport lines, so the first
    # iterate is already the fixed point
    assert sol.iterations == 1 and sol.deltas[0] < 1e-15


def test_flat_zero_form_matches_dalembert_to_second_order():
    eps = 0.1
    errs = []
    for n in (16, 32, 64):
        grid = lc.TriangleGrid.triangle(1.0, n)
        sol = lc.solve_triangle(lc.to_characteristic_data(flat_data(eps, 2.0), grid), EuclideanChart(3), ZERO)
        nv = lc.node_values(sol.state)
        exact = eps * np.sin(nv["x"]) * np.cos(nv["t"])
        errs.append(np.abs(nv["y"][:, 0] - exact).max())
        # the trapezoid errors of y and z cancel in their mean for flat data
        assert np.abs(0.5 * (nv["y"] + nv["z"])[:, 0] - exact).max() < 1e-14
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((rates > 1.8) & (rates < 2.2)), (errs, rates)


def test_zero_data_zero_delta():
    data = lc.CauchyData(lambda x: np.zeros((np.size(x), 3)), lambda x: np.zeros((np.size(x), 3)), 1.0)
    grid = lc.TriangleGrid.triangle(1.0, 8)
    sol = lc.solve_triangle(lc.to_characteristic_data(data, grid), EuclideanChart(3), FLAT_B)
    assert sol.deltas == [0.0]


def test_form_and_chart_must_match():
    with pytest.raises(ValueError):
        FLAT_B.z_chart_components(StereographicChart(3), np.zeros(3))


def test_sphere_contraction_and_convergence():
    chart, B, data = sphere_small()
    params = lc.compute_bounds(data, chart)
    grid = lc.TriangleGrid.triangle(lc.K_SAFETY * params.k, 32)
    sol = lc.solve_triangle(lc.to_characteristic_data(data, grid, chart), chart, B)
    d = np.array(sol.deltas)
    assert sol.iterations <= 30 and d[-1] < lc.TOL_FIX
    assert np.all(d[1:] / d[:-1] < 1)


def test_no_convergence_reported():
    chart, B, data = sphere_small()
    grid = lc.TriangleGrid.triangle(0.5, 16)
    with pytest.raises(NoConvergence) as exc:
        lc.solve_triangle(lc.to_characteristic_data(data, grid, chart), chart, B, max_iter=2)
    assert exc.value.iterations == 2 and exc.value.last_delta > 0


def test_residual_and_gap_second_order_on_sphere():
    chart, B, data = sphere_small()
    k = lc.K_SAFETY * lc.compute_bounds(data, chart).k
    res, gaps, drift = [], [], []
    for n in (16, 32, 64):
        grid = lc.TriangleGrid.triangle(k, n)
        st_ = lc.solve_triangle(lc.to_characteristic_data(data, grid, chart), chart, B).state
        res.append(lc.system_residual(st_, chart, B)["max"])
        gaps.append(lc.yz_gap(st_))
        drift.append(lc.isometry_drift(st_, chart))
        assert lc.derivative_bound(st_) <= lc.compute_bounds(data, chart).M / chart.ellipticity() * (1 + 10 * grid.h)
    for series in (res, drift):
        rates = np.log2(np.array(series[:-1]) / np.array(series[1:]))
        assert np.all((rates > 1.7) & (rates < 2.3)), (series, rates)
    assert all(g <= 5 * r for g, r in zip(gaps, res))


# --- restarts -----------------------------------------------------------------


def test_restart_schedule_exhausts_window():
    data = flat_data(0.1, 1.0)
    out = lc.extend_global(data, EuclideanChart(3), FLAT_B, t_final=2.0, n_char=16, k=0.25)
    assert len(out.stages) == 4
    assert out.exhausted and out.t_reached == pytest.approx(1.0)
    assert [s.t0 for s in out.stages] == pytest.approx([0, 0.25, 0.5, 0.75])
    with pytest.raises(WindowExhausted):
        lc.extend_global(data, EuclideanChart(3), FLAT_B, 2.0, 16, k=0.25, strict=True)


def test_restart_matches_single_solve_on_overlap():
    data = flat_data(0.2, 1.0)
    chart = EuclideanChart(3)
    out = lc.extend_global(data, chart, FLAT_B, t_final=1.0, n_char=8, k=0.25)
    assert not out.exhausted
    tall = lc.TriangleGrid.triangle(1.0, 32)
    ref = lc.solve_triangle(lc.to_characteristic_data(data, tall, chart), chart, FLAT_B).state
    nv = lc.node_values(ref)
    err = 0.0
    for t, x, y, z in zip(nv["t"], nv["x"], nv["y"], nv["z"]):
        err = max(err, np.abs(out.sample(t, x) - 0.5 * (y + z)).max())
    assert err < 1e-12


# --- agreement with the extrinsic solver -------------------------------------------------


@pytest.mark.parametrize("target, B", [("flat3", FLAT_B), ("sphere3", TwoFormPotential("sphere3_volume", 1.0))])
def test_agrees_with_extrinsic_solver(target, B):
    m = flat3() if target == "flat3" else sphere3()
    chart = m.default_chart()
    params = {"u_modes": [[0, 0.2, 1, 0], [2, 0.1, 1, 1.0]], "ut_modes": [[1, 0.1, 1, 0]]}
    u0, u1 = make_initial_data(m, "sine_mode", params)
    data = lc.chart_data_from_ambient(u0, u1, chart, np.pi)
    k = lc.K_SAFETY * lc.compute_bounds(data, chart).k
    n = 32
    grid = lc.TriangleGrid.triangle(k, n)
    state = lc.solve_triangle(lc.to_characteristic_data(data, grid, chart), chart, B).state
    h = grid.h
    eg = GridSpec(-np.pi, np.pi, 256, h / 4, k)
    traj = solve(u0, u1, eg, m, B, record_diagnostics=False)
    assert lc.compare_with_trajectory(state, chart, traj) < 1e-3
