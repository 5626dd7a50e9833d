"""Scalar potential V and the two-form potential through Omega = dB and Z.

Z is the bundle map with <Z(xi1 ^ xi2), eta> = Omega(eta, xi1, xi2).
Off the target, every quantity is extended by nearest-point projection:
evaluate at ``project_point(x)`` and project vector arguments tangentially.

Orientation: on the 3-sphere ``Omega(eta, xi1, xi2) = c det(p, eta, xi1, xi2)``
and on flat R^3 ``Omega = c det(eta, xi1, xi2)``, so there ``Z = c xi1 x xi2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .errors import NotTangent
from .geometry import Chart, TargetManifold

TANGENCY_TOL = 1e-8


def _levi_civita(dim):
    eps = np.zeros((dim,) * dim)
    for perm in permutations(range(dim)):
        eps[perm] = np.linalg.det(np.eye(dim)[list(perm)])
    return eps


EPS3 = _levi_civita(3)
EPS4 = _levi_civita(4)


def triple_cross(a, b, c):
    """The R^4 vector T with <T, e> = det(e, a, b, c), i.e. T_i = eps_ijkl a_j b_k c_l.

    Component i is a signed 3x3 minor over the remaining coordinates.
    """
    a, b, c = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c)))
    out = np.empty(a.shape)
    for i, sign in enumerate((1.0, -1.0, 1.0, -1.0)):
        keep = [j for j in range(4) if j != i]
        out[..., i] = sign * np.sum(a[..., keep] * np.cross(b[..., keep], c[..., keep]), axis=-1)
    return out


@dataclass(frozen=True)
class ScalarPotential:
    """V on N, given by a function on the ambient space restricted to N.

    kinds: ``zero``; ``linear_height``: V = alpha <d, p>;
    ``quadratic``: V = alpha |p - c|^2.
    """

    kind: str = "zero"
    alpha: float = 0.0
    vector: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in ("zero", "linear_height", "quadratic"):
            raise ValueError(f"unknown scalar potential {self.kind!r}")

    @property
    def is_zero(self):
        return self.kind == "zero" or self.alpha == 0.0

    def _vec(self, q):
        v = np.zeros(q)
        if self.vector:
            v[: len(self.vector)] = self.vector
        return v

    def value(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "zero":
            return np.zeros(p.shape[:-1])
        v = self._vec(p.shape[-1])
        if self.kind == "linear_height":
            return self.alpha * (p @ v)
        return self.alpha * np.sum((p - v) ** 2, axis=-1)

    def ambient_gradient(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(p)
        v = self._vec(p.shape[-1])
        if self.kind == "linear_height":
            return np.broadcast_to(self.alpha * v, p.shape).copy()
        return 2 * self.alpha * (p - v)

    def ambient_hessian(self, p):
        p = np.asarray(p, dtype=float)
        q = p.shape[-1]
        c = 2 * self.alpha if self.kind == "quadratic" else 0.0
        return np.broadcast_to(c * np.eye(q), p.shape[:-1] + (q, q)).copy()

    def grad(self, m: TargetManifold, p, check=True):
        """Intrinsic gradient: tangential part of the ambient gradient."""
        p = np.asarray(p, dtype=float)
        if check:
            m.check_on_manifold(p)
        return m.project_tangent(p, self.ambient_gradient(p), check=False)

    def hessian(self, m: TargetManifold, p, w1, w2):
        """Hess V(w1, w2) = D^2 V(w1, w2) + <DV, II(w1, w2)> for tangent w1, w2."""
        p = np.asarray(p, dtype=float)
        d2 = np.einsum("...a,...ab,...b->...", w1, self.ambient_hessian(p), w2)
        ii = m.second_fundamental_form(p, w1, w2)
        return d2 + np.sum(self.ambient_gradient(p) * ii, axis=-1)

    def sup_on(self, m: TargetManifold):
        """Supremum of V over N (inf for unbounded flat potentials)."""
        if self.is_zero:
            return 0.0
        v = self._vec(m.ambient_dim)
        if m.kind == "flat":
            if self.kind == "quadratic" and self.alpha < 0:
                return 0.0
            return float("inf")
        r = m.radius
        if self.kind == "linear_height":
            return abs(self.alpha) * float(np.linalg.norm(v)) * r
        far = r + float(np.linalg.norm(v))
        near = abs(r - float(np.linalg.norm(v)))
        return max(self.alpha * far**2, self.alpha * near**2)


def grad_v(V: ScalarPotential, m: TargetManifold, p):
    return V.grad(m, p)


@dataclass(frozen=True)
class TwoFormPotential:
    """The field strength Omega = dB of a two-form potential B.

    kinds: ``zero``; ``constant_volume3``: Omega = c dx^dy^dz on flat R^3;
    ``sphere3_volume``: Omega = c det(p, ., ., .) on S^3 in R^4.
    """

    kind: str = "zero"
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant_volume3", "sphere3_volume"):
            raise ValueError(f"unknown two-form {self.kind!r}")

    @property
    def is_zero(self):
        return self.kind == "zero" or self.c == 0.0

    def compatible_with(self, m: TargetManifold) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "constant_volume3":
            return m.kind == "flat" and m.ambient_dim == 3
        return m.kind == "sphere" and m.ambient_dim == 4

    def omega(self, p, eta, xi1, xi2):
        p = np.asarray(p, dtype=float)
        eta, xi1, xi2 = (np.asarray(a, dtype=float) for a in (eta, xi1, xi2))
        if self.kind == "zero":
            return np.zeros(np.broadcast_shapes(p.shape, eta.shape)[:-1])
        if self.kind == "constant_volume3":
            return self.c * np.einsum("ijk,...i,...j,...k->...", EPS3, eta, xi1, xi2)
        return self.c * np.einsum("ijkl,...i,...j,...k,...l->...", EPS4, p, eta, xi1, xi2)

    def z_ambient(self, p, xi1, xi2):
        """Z(xi1 ^ xi2) at p, no tangency checks; fully vectorized."""
        p = np.asarray(p, dtype=float)
        xi1 = np.asarray(xi1, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        shape = np.broadcast_shapes(p.shape, xi1.shape, xi2.shape)
        if self.kind == "zero":
            return np.zeros(shape)
        if self.kind == "constant_volume3":
            return self.c * np.cross(xi1, xi2)
        return -self.c * triple_cross(p, xi1, xi2)

    def z_apply(self, m: TargetManifold, p, xi1, xi2, check=True):
        p = np.asarray(p, dtype=float)
        if check:
            m.check_on_manifold(p)
            for xi in (xi1, xi2):
                off = np.asarray(xi) - m.project_tangent(p, xi, check=False)
                if np.max(np.abs(off), initial=0.0) > TANGENCY_TOL * max(1.0, np.max(np.abs(xi))):
                    raise NotTangent("Z arguments must be tangent to the target")
        return self.z_ambient(p, xi1, xi2)

    def z_extended(self, m: TargetManifold, x, xi1, xi2):
        """Projection extension of Z to the ambient space."""
        p = m.project_point(x)
        t1 = m.project_tangent(p, xi1, check=False)
        t2 = m.project_tangent(p, xi2, check=False)
        return self.z_ambient(p, t1, t2)

    def z_chart_components(self, chart: Chart, y):
        """Zc[..., i, j, k] = Z^i(d_j ^ d_k) in chart coordinates.

        Obtained by pulling Omega back through the chart embedding and raising
        the first index with the chart metric.
        """
        y = np.asarray(y, dtype=float)
        chart.check_domain(y)
        n = chart.n
        if self.is_zero:
            return np.zeros(y.shape[:-1] + (n, n, n))
        p = chart.embed(y)
        q = {"constant_volume3": 3, "sphere3_volume": 4}[self.kind]
        if p.shape[-1] != q:
            raise ValueError(f"two-form {self.kind!r} needs a chart into R^{q}, not R^{p.shape[-1]}")
        J = chart.embed_jacobian(y)  # (..., q, n)
        cols = [J[..., :, j] for j in range(n)]
        omega_c = np.zeros(y.shape[:-1] + (n, n, n))
        for j in range(n):
            for k in range(j + 1, n):
                # w with <w, e> = Omega(e, d_j, d_k) in ambient coordinates
                if self.kind == "constant_volume3":
                    w = np.cross(cols[j], cols[k])
                else:
                    w = -triple_cross(p, cols[j], cols[k])
                val = self.c * np.einsum("...al,...a->...l", J, w)
                omega_c[..., :, j, k] = val
                omega_c[..., :, k, j] = -val
        ginv = np.linalg.inv(chart.metric(y))
        return np.einsum("...il,...ljk->...ijk", ginv, omega_c)


def z_apply(B: TwoFormPotential, m: TargetManifold, p, xi1, xi2):
    return B.z_apply(m, p, xi1, xi2)


def z_chart_components(B: TwoFormPotential, chart: Chart, y):
    return B.z_chart_components(chart, y)


def make_scalar_potential(table: dict | None) -> ScalarPotential:
    if not table:
        return ScalarPotential()
    kind = table.get("kind", "zero")
    vec = table.get("direction", table.get("center", ()))
    return ScalarPotential(kind, float(table.get("alpha", 0.0)), tuple(float(a) for a in vec))


def make_two_form(table: dict | None) -> TwoFormPotential:
    if not table:
        return TwoFormPotential()
    return TwoFormPotential(table.get("kind", "zero"), float(table.get("c", 0.0)))
