"""Seeded property checks of the geometry and potentials, used by ``stringwave check``.

Each check returns a PropertyResult; none of them raise on failure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import TargetManifold, christoffel
from .potentials import ScalarPotential, TwoFormPotential


@dataclass(frozen=True)
class PropertyResult:
    name: str
    ok: bool
    value: float
    tol: float

    def line(self):
        status = "PASS" if self.ok else "FAIL"
        return f"{status} {self.name}: {self.value:.3e} (tol {self.tol:.1e})"


def result(name, value, tol):
    value = float(value)
    return PropertyResult(name, bool(np.isfinite(value) and value <= tol), value, tol)


def random_points(m: TargetManifold, n, rng):
    x = rng.standard_normal((n, m.ambient_dim))
    return m.project_point(x) if m.kind == "sphere" else x


def random_tangents(m: TargetManifold, p, rng):
    return m.project_tangent(p, rng.standard_normal(p.shape), check=False)


def chart_points(chart, n, rng, radius=0.9):
    y = rng.standard_normal((n, chart.n))
    y *= (radius * rng.uniform(0, 1, (n, 1)) ** (1 / chart.n)) / np.linalg.norm(y, axis=-1, keepdims=True)
    return y


def geometry_properties(m: TargetManifold, samples=64, seed=0):
    rng = np.random.default_rng(seed)
    p = random_points(m, samples, rng)
    w1, w2 = random_tangents(m, p, rng), random_tangents(m, p, rng)
    x = rng.standard_normal((samples, m.ambient_dim)) * 2
    out = []
    proj = m.project_point(x)
    out.append(result("projection lands on target", np.max(m.distance(proj)), 1e-12 * m.radius))
    out.append(result("projection is idempotent", np.max(np.abs(m.project_point(proj) - proj)), 1e-12))
    t = m.project_tangent(p, x, check=False)
    out.append(result("tangent projection is idempotent",
                      np.max(np.abs(m.project_tangent(p, t, check=False) - t)), 1e-12))
    ii = m.second_fundamental_form(p, w1, w2, check=False)
    out.append(result("second fundamental form is symmetric",
                      np.max(np.abs(ii - m.second_fundamental_form(p, w2, w1, check=False))), 1e-12))
    out.append(result("second fundamental form is normal",
                      np.max(np.abs(m.project_tangent(p, ii, check=False))), 1e-12))
    # a curve c(s) = project(p + s w) has acceleration II(w, w) at s = 0
    s = 1e-4
    acc = (m.project_point(p + s * w1) - 2 * p + m.project_point(p - s * w1)) / s**2
    out.append(result("II matches curve acceleration",
                      np.max(np.abs(acc - m.second_fundamental_form(p, w1, w1, check=False))), 1e-5))
    out.extend(chart_properties(m.default_chart(), samples, seed))
    return out


def chart_properties(chart, samples=64, seed=0):
    rng = np.random.default_rng(seed + 1)
    y = chart_points(chart, samples, rng)
    out = []
    p = chart.embed(y)
    out.append(result("chart inverse round trip", np.max(np.abs(chart.from_ambient(p) - y)), 1e-12))
    J = chart.embed_jacobian(y)
    g = chart.metric(y)
    out.append(result("chart metric is the pulled-back inner product",
                      np.max(np.abs(np.einsum("...ai,...aj->...ij", J, J) - g)), 1e-12))
    gam = christoffel(chart, y)
    out.append(result("Christoffel symbols symmetric in lower indices",
                      np.max(np.abs(gam - np.swapaxes(gam, -1, -2))), 1e-12))
    out.append(result("analytic Christoffel symbols match finite differences",
                      np.max(np.abs(gam - christoffel(chart, y, analytic=False))), 1e-6))
    return out


def potential_properties(m: TargetManifold, B: TwoFormPotential, V: ScalarPotential, samples=64, seed=0):
    rng = np.random.default_rng(seed + 2)
    p = random_points(m, samples, rng)
    a, b, e = (random_tangents(m, p, rng) for _ in range(3))
    out = []
    if not B.is_zero:
        z = B.z_apply(m, p, a, b)
        out.append(result("Z is antisymmetric", np.max(np.abs(z + B.z_apply(m, p, b, a))), 1e-12))
        out.append(result("Z is tangent", np.max(np.abs(z - m.project_tangent(p, z, check=False))), 1e-12))
        out.append(result("<Z(a ^ b), eta> equals Omega(eta, a, b)",
                          np.max(np.abs(np.sum(z * e, axis=-1) - B.omega(p, e, a, b))), 1e-12))
        out.append(result("Omega(a, a, b) vanishes", np.max(np.abs(np.sum(z * a, axis=-1))), 1e-12))
        chart = m.default_chart()
        y = chart_points(chart, samples, rng)
        J = chart.embed_jacobian(y)
        ca, cb = rng.standard_normal((2, samples, chart.n))
        zc = B.z_chart_components(chart, y)
        lhs = np.einsum("...ai,...ijk,...j,...k->...a", J, zc, ca, cb)
        pa = chart.embed(y)
        rhs = B.z_ambient(pa, np.einsum("...ai,...i->...a", J, ca), np.einsum("...ai,...i->...a", J, cb))
        out.append(result("chart components of Z match the ambient map", np.max(np.abs(lhs - rhs)), 1e-10))
    if not V.is_zero:
        grad = V.grad(m, p)
        out.append(result("grad V is tangent",
                          np.max(np.abs(grad - m.project_tangent(p, grad, check=False))), 1e-12))
        s = 1e-5
        dv = (V.value(m.project_point(p + s * a)) - V.value(m.project_point(p - s * a))) / (2 * s)
        out.append(result("grad V matches directional derivatives",
                          np.max(np.abs(dv - np.sum(grad * a, axis=-1))), 1e-6))
    return out
