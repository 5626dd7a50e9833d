import numpy as np
import pytest

from stringwave.geometry import flat3, sphere2, sphere3
from stringwave.presets import PRESETS, default_base, geodesic_solution, make_initial_data

TARGETS = [flat3(), sphere3(), sphere3(2.0), sphere2()]


@pytest.mark.parametrize("m", TARGETS, ids=lambda m: m.name)
@pytest.mark.parametrize("preset", PRESETS)
def test_presets_are_admissible(m, preset):
    params = {"u_modes": [[0, 0.2, 1, 0]], "ut_modes": [[1, 0.1, 2, 0]], "amplitude": [0.3],
              "velocity": [0, 0.2], "direction": [1, 0, 0], "perturbation": 1e-3}
    u0, u1 = make_initial_data(m, preset, params, seed=3)
    x = np.linspace(0, 2 * np.pi, 50)
    p, w = u0(x), u1(x)
    assert p.shape == w.shape == (50, m.ambient_dim)
    assert m.distance(p).max() < 1e-12
    np.testing.assert_allclose(m.project_tangent(p, w, check=False), w, atol=1e-12)


def test_perturbation_is_seeded_and_small():
    m = sphere3()
    x = np.linspace(0, 2 * np.pi, 30)
    a = make_initial_data(m, "constant", {"perturbation": 1e-6}, seed=1)[0](x)
    b = make_initial_data(m, "constant", {"perturbation": 1e-6}, seed=1)[0](x)
    c = make_initial_data(m, "constant", {"perturbation": 1e-6}, seed=2)[0](x)
    base = make_initial_data(m, "constant", {}, seed=1)[0](x)
    np.testing.assert_array_equal(a, b)
    assert np.abs(a - c).max() > 0
    assert 0 < np.abs(a - base).max() <= 1.1e-6


def test_default_base_and_unknown_preset():
    np.testing.assert_array_equal(default_base(sphere3(2.0)), [0, 0, 0, 2.0])
    np.testing.assert_array_equal(default_base(flat3()), [0, 0, 0])
    with pytest.raises(ValueError):
        make_initial_data(flat3(), "noise")


def test_geodesic_solution():
    m = sphere3(2.0)
    p, v = np.array([0, 0, 0, 2.0]), np.array([0.5, 0, 0, 0])
    t = 1.3
    q = geodesic_solution(m, p, v, t)
    assert np.linalg.norm(q) == pytest.approx(2.0)
    np.testing.assert_allclose(q, [2 * np.sin(t / 4), 0, 0, 2 * np.cos(t / 4)])
    np.testing.assert_allclose(geodesic_solution(m, p, 0 * v, t), p)
    np.testing.assert_allclose(geodesic_solution(flat3(), [1, 0, 0], [0, 1, 0], 2.0), [1, 2, 0])
