import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stringwave.stencils import d2_dx2, d_dx, integrate, l2_norm, quad_weights, sq_norm


def periodic_grid(n):
    x = 2 * np.pi * np.arange(n) / n
    return x, 2 * np.pi / n


@pytest.mark.parametrize("periodic", [True, False])
def test_derivatives_second_order(periodic):
    errs1, errs2 = [], []
    for n in (64, 128, 256):
        if periodic:
            x, dx = periodic_grid(n)
        else:
            x = np.linspace(0, 1, n + 1)
            dx = 1 / n
        f = np.sin(3 * x)
        errs1.append(np.abs(d_dx(f, dx, periodic) - 3 * np.cos(3 * x)).max())
        errs2.append(np.abs(d2_dx2(f, dx, periodic) + 9 * np.sin(3 * x)).max())
    for e in (errs1, errs2):
        rates = np.log2(np.array(e[:-1]) / np.array(e[1:]))
        assert np.all(rates > 1.8), rates


@given(a=st.floats(-5, 5), b=st.floats(-5, 5), n=st.integers(8, 64))
def test_derivatives_exact_on_quadratics_fixed_ends(a, b, n):
    x = np.linspace(-1, 2, n + 1)
    dx = 3 / n
    f = a * x**2 + b * x
    np.testing.assert_allclose(d_dx(f, dx, False), 2 * a * x + b, atol=1e-9 * (1 + abs(a) + abs(b)))
    np.testing.assert_allclose(d2_dx2(f, dx, False), 2 * a, atol=1e-7 * (1 + abs(a)))


def test_stencils_act_on_component_axes():
    x, dx = periodic_grid(32)
    f = np.stack([np.sin(x), np.cos(x), x * 0], axis=-1)
    d = d_dx(f, dx)
    assert d.shape == f.shape
    np.testing.assert_allclose(d[:, 0], d_dx(f[:, 0], dx))


def test_quadrature():
    x, dx = periodic_grid(50)
    assert integrate(np.sin(x) ** 2, dx) == pytest.approx(np.pi, rel=1e-13)
    w = quad_weights(11, 0.1, periodic=False)
    assert w.sum() == pytest.approx(1.0)
    assert integrate(np.linspace(0, 1, 11), 0.1, periodic=False) == pytest.approx(0.5)


def test_l2_norm_and_sq_norm():
    x, dx = periodic_grid(64)
    f = np.stack([np.sin(x), np.cos(x)], axis=-1)
    assert l2_norm(f, dx) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-13)
    np.testing.assert_allclose(sq_norm(f), 1.0)
