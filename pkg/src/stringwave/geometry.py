"""Target manifolds, extrinsic (embedded in R^q) and intrinsic (charts).

All point/vector arguments broadcast over leading axes: a point is an array
of shape ``(..., q)`` and a chart coordinate an array of shape ``(..., n)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartDomainExceeded, DegeneratePoint, PointOffManifold, SingularMetric

TOL_ON_MANIFOLD = 1e-8
H_CHART = 1e-5


@dataclass(frozen=True)
class TargetManifold:
    """An embedded target N in R^q: flat Euclidean space or a round sphere."""

    kind: str  # "flat" | "sphere"
    ambient_dim: int
    radius: float = 1.0
    tol_on_manifold: float = TOL_ON_MANIFOLD

    def __post_init__(self):
        if self.kind not in ("flat", "sphere"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.ambient_dim < 3:
            raise ValueError("ambient dimension must be at least 3")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def intrinsic_dim(self) -> int:
        return self.ambient_dim if self.kind == "flat" else self.ambient_dim - 1

    @property
    def name(self) -> str:
        if self.kind == "flat":
            return f"flat{self.ambient_dim}"
        return f"sphere{self.intrinsic_dim}"

    def project_point(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "flat":
            return x.copy()
        norm = np.linalg.norm(x, axis=-1, keepdims=True)
        if np.any(norm == 0.0):
            raise DegeneratePoint("cannot project the origin onto a sphere")
        return self.radius * x / norm

    def distance(self, x):
        """Pointwise distance from ``x`` to N."""
        x = np.asarray(x, dtype=float)
        if self.kind == "flat":
            return np.zeros(x.shape[:-1])
        return np.abs(np.linalg.norm(x, axis=-1) - self.radius)

    def check_on_manifold(self, p):
        if self.kind == "flat":
            return
        d = self.distance(p)
        if np.max(d, initial=0.0) > self.tol_on_manifold:
            raise PointOffManifold(f"point lies {np.max(d):.3e} away from the target")

    def unit_normal(self, p):
        """Unit normal field at ``p`` (sphere only)."""
        p = np.asarray(p, dtype=float)
        return p / np.linalg.norm(p, axis=-1, keepdims=True)

    def project_tangent(self, p, w, check=True):
        p = np.asarray(p, dtype=float)
        w = np.asarray(w, dtype=float)
        if self.kind == "flat":
            return np.broadcast_to(w, np.broadcast_shapes(p.shape, w.shape)).copy()
        if check:
            self.check_on_manifold(p)
        nu = self.unit_normal(p)
        return w - np.sum(w * nu, axis=-1, keepdims=True) * nu

    def second_fundamental_form(self, p, w1, w2, check=True):
        """II(w1, w2) at p, a normal vector; for a sphere -<w1,w2> p / r^2."""
        p = np.asarray(p, dtype=float)
        w1 = np.asarray(w1, dtype=float)
        w2 = np.asarray(w2, dtype=float)
        if self.kind == "flat":
            return np.zeros(np.broadcast_shapes(p.shape, w1.shape, w2.shape))
        if check:
            self.check_on_manifold(p)
        return -np.sum(w1 * w2, axis=-1, keepdims=True) * p / self.radius**2

    def default_chart(self) -> "Chart":
        if self.kind == "flat":
            return EuclideanChart(self.intrinsic_dim)
        return StereographicChart(self.intrinsic_dim, self.radius)


def flat3() -> TargetManifold:
    return TargetManifold("flat", 3)


def sphere3(radius=1.0) -> TargetManifold:
    return TargetManifold("sphere", 4, radius)


def sphere2(radius=1.0) -> TargetManifold:
    return TargetManifold("sphere", 3, radius)


def make_target(name: str, radius: float = 1.0) -> TargetManifold:
    if name == "flat3":
        return flat3()
    if name == "sphere3":
        return sphere3(radius)
    if name == "sphere2":
        return sphere2(radius)
    raise ValueError(f"unknown target {name!r}")


class Chart:
    """A coordinate chart on the closed ball |y| <= domain_radius.

    Subclasses provide the metric, optionally its analytic derivatives, and
    the embedding into the ambient space of the matching target.
    """

    n: int
    ambient_dim: int
    domain_radius: float = 1.0
    h_chart: float = H_CHART

    def contains(self, y, slack=1e-12):
        y = np.asarray(y, dtype=float)
        return np.linalg.norm(y, axis=-1) <= self.domain_radius + slack

    def check_domain(self, y):
        if not np.all(self.contains(y)):
            r = np.max(np.linalg.norm(np.asarray(y), axis=-1))
            raise ChartDomainExceeded(
                f"chart coordinate with |y| = {r:.6g} exceeds {self.domain_radius}"
            )

    def metric(self, y):
        raise NotImplementedError

    def metric_derivatives(self, y):
        """Array ``D[..., i, j, k] = d g_ij / d y^k``; None if not analytic."""
        return None

    def metric_derivatives_fd(self, y, h=None):
        h = self.h_chart if h is None else h
        y = np.asarray(y, dtype=float)
        out = np.empty(y.shape[:-1] + (self.n, self.n, self.n))
        for k in range(self.n):
            e = np.zeros(self.n)
            e[k] = h
            out[..., k] = (self.metric(y + e) - self.metric(y - e)) / (2 * h)
        return out

    def embed(self, y):
        raise NotImplementedError

    def embed_jacobian(self, y):
        """Array ``J[..., a, k] = d p^a / d y^k``."""
        raise NotImplementedError

    def from_ambient(self, p):
        raise NotImplementedError

    def from_ambient_jacobian(self, p):
        """Array ``K[..., k, a] = d y^k / d p^a`` of the inverse chart map."""
        raise NotImplementedError

    def ellipticity(self, samples=4096, seed=0):
        """Largest a with g(y)(l, l) >= a^2 |l|^2, sampled over the chart ball."""
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(samples, self.n))
        dirs = pts / np.linalg.norm(pts, axis=-1, keepdims=True)
        radii = self.domain_radius * rng.uniform(size=(samples, 1)) ** (1.0 / self.n)
        ys = np.concatenate([dirs * radii, dirs * self.domain_radius, np.zeros((1, self.n))])
        lam = np.linalg.eigvalsh(self.metric(ys))[..., 0]
        return float(np.sqrt(np.min(lam)))


class EuclideanChart(Chart):
    def __init__(self, n=3, domain_radius=1.0):
        self.n = n
        self.ambient_dim = n
        self.domain_radius = domain_radius

    def metric(self, y):
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.eye(self.n), y.shape[:-1] + (self.n, self.n)).copy()

    def metric_derivatives(self, y):
        y = np.asarray(y, dtype=float)
        return np.zeros(y.shape[:-1] + (self.n,) * 3)

    def embed(self, y):
        return np.array(y, dtype=float)

    def embed_jacobian(self, y):
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.eye(self.n), y.shape[:-1] + (self.n, self.n)).copy()

    def from_ambient(self, p):
        return np.array(p, dtype=float)

    def from_ambient_jacobian(self, p):
        return self.embed_jacobian(p)


class StereographicChart(Chart):
    """Stereographic coordinates on the sphere of radius r in R^(n+1).

    Projection from the south pole -r e_{n+1}; y = 0 is the north pole and
    the metric is conformal, g = 4 r^2 / (1 + |y|^2)^2 * identity.
    """

    def __init__(self, n=3, radius=1.0, domain_radius=1.0):
        self.n = n
        self.ambient_dim = n + 1
        self.radius = radius
        self.domain_radius = domain_radius

    def _conformal(self, y):
        s = np.sum(y * y, axis=-1)
        return 4 * self.radius**2 / (1 + s) ** 2, s

    def metric(self, y):
        y = np.asarray(y, dtype=float)
        lam, _ = self._conformal(y)
        return lam[..., None, None] * np.eye(self.n)

    def metric_derivatives(self, y):
        y = np.asarray(y, dtype=float)
        s = np.sum(y * y, axis=-1)
        dlam = -16 * self.radius**2 * y / (1 + s[..., None]) ** 3
        return np.eye(self.n)[..., None] * dlam[..., None, None, :]

    def embed(self, y):
        y = np.asarray(y, dtype=float)
        s = np.sum(y * y, axis=-1, keepdims=True)
        return self.radius * np.concatenate([2 * y, 1 - s], axis=-1) / (1 + s)

    def embed_jacobian(self, y):
        y = np.asarray(y, dtype=float)
        s = np.sum(y * y, axis=-1)[..., None, None]
        top = 2 * np.eye(self.n) / (1 + s) - 4 * y[..., :, None] * y[..., None, :] / (1 + s) ** 2
        bottom = -4 * y[..., None, :] / (1 + s) ** 2
        return self.radius * np.concatenate([top, bottom], axis=-2)

    def from_ambient(self, p):
        p = np.asarray(p, dtype=float)
        denom = self.radius + p[..., -1:]
        if np.any(denom <= 0):
            raise ChartDomainExceeded("the south pole is not covered by the chart")
        return p[..., :-1] / denom

    def from_ambient_jacobian(self, p):
        p = np.asarray(p, dtype=float)
        denom = (self.radius + p[..., -1])[..., None, None]
        left = np.eye(self.n) / denom
        right = -p[..., :-1, None] / denom**2
        return np.concatenate([left, right], axis=-1)


def christoffel(chart: Chart, y, analytic=True, h=None):
    """Gamma[..., i, j, k] = 1/2 g^il (d_j g_kl + d_k g_jl - d_l g_jk)."""
    y = np.asarray(y, dtype=float)
    chart.check_domain(y)
    g = chart.metric(y)
    dg = chart.metric_derivatives(y) if analytic else None
    if dg is None:
        dg = chart.metric_derivatives_fd(y, h)
    cond = np.linalg.cond(g)
    if not np.all(np.isfinite(cond)) or np.max(cond) > 1e12:
        raise SingularMetric("metric is not invertible")
    ginv = np.linalg.inv(g)
    # dg[..., a, b, c] = d_c g_ab ; lowered[..., l, j, k] = d_j g_kl + d_k g_jl - d_l g_jk
    lowered = (
        np.einsum("...klj->...ljk", dg)
        + np.einsum("...jlk->...ljk", dg)
        - np.einsum("...jkl->...ljk", dg)
    )
    return 0.5 * np.einsum("...il,...ljk->...ijk", ginv, lowered)
