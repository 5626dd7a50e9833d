"""Characteristic (lightcone) solver for wave maps with a two-form potential.

Lightcone coordinates xi = (x + t)/2, eta = (t - x)/2, so that d_xi d_eta is
the wave operator. With u = d_xi phi and v = d_eta phi the equation becomes the
first-order system

    d_eta u + Gamma(z)(u, v) + 1/2 Z(z)(u ^ v) = 0,    d_xi y = u,
    d_xi v + Gamma(y)(v, u) + 1/2 Z(y)(u ^ v) = 0,     d_eta z = v,

where y and z both represent phi in a chart. It is solved by a linear Picard
iteration: coefficients frozen at the previous iterate, each transport
equation integrated along its characteristic with the trapezoidal rule.

Grid: base nodes x_p = x_left + 2 p h on t = 0, p = 0..P. Node (i, j) with
0 <= j <= i <= P sits at xi = x_left/2 + i h, eta = -x_left/2 - j h, so
t = (i - j) h and x = x_left + (i + j) h. Stepping j -> j - 1 advances eta by h. Only nodes with i - j <= levels
are solved; levels = P gives the characteristic triangle.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ChartDomainExceeded,
    InsufficientSamples,
    LinearSolveFailure,
    NoConvergence,
    WindowExhausted,
)
from .geometry import Chart, christoffel
from .potentials import TwoFormPotential

log = logging.getLogger(__name__)

TOL_FIX = 1e-10
MAX_ITER = 100
K_SAFETY = 0.9


@dataclass(frozen=True)
class TriangleGrid:
    x_left: float
    h: float
    P: int
    levels: int

    @classmethod
    def triangle(cls, k, n_char, center=0.0):
        """The triangle with base [center - k, center + k] and apex at t = k."""
        return cls(center - k, k / n_char, n_char, n_char)

    def __post_init__(self):
        if self.h <= 0 or self.P < 0 or not 0 <= self.levels <= self.P:
            raise ValueError("invalid characteristic grid")

    @property
    def k(self):
        """Height of the solved region (the triangle half-width for triangles)."""
        return self.levels * self.h

    @property
    def n_char(self):
        return self.levels

    @property
    def base_x(self):
        return self.x_left + 2 * self.h * np.arange(self.P + 1)

    @property
    def xi(self):
        return self.x_left / 2 + self.h * np.arange(self.P + 1)

    @property
    def eta(self):
        return -self.x_left / 2 - self.h * np.arange(self.P + 1)

    def mask(self):
        i, j = np.indices((self.P + 1, self.P + 1))
        return (j <= i) & (i - j <= self.levels)

    def level(self, ell):
        """Node indices (i, j) on the level t = ell * h."""
        i = np.arange(ell, self.P + 1)
        return i, i - ell

    def tx(self, i, j):
        return (np.asarray(i) - j) * self.h, self.x_left + (np.asarray(i) + j) * self.h


@dataclass
class CharacteristicState:
    grid: TriangleGrid
    y: np.ndarray
    z: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def n(self):
        return self.y.shape[-1]

    def copy(self):
        return CharacteristicState(self.grid, self.y.copy(), self.z.copy(), self.u.copy(), self.v.copy())

    def base(self):
        i = np.arange(self.grid.P + 1)
        return self.y[i, i], self.z[i, i], self.u[i, i], self.v[i, i]


@dataclass(frozen=True)
class TriangleParams:
    L: float
    a: float
    M: float
    n: int
    k: float


@dataclass(frozen=True)
class CauchyData:
    """Initial data in chart coordinates: phi0(x) and phi1(x), arrays (len(x), n)."""

    phi0: object
    phi1: object
    L: float


def chart_data_from_ambient(u0, u1, chart: Chart, L: float) -> CauchyData:
    """Pull ambient initial data (u0, u1) back to chart coordinates."""

    def phi0(x):
        return chart.from_ambient(u0(np.asarray(x, dtype=float)))

    def phi1(x):
        p = u0(np.asarray(x, dtype=float))
        return np.einsum("...ka,...a->...k", chart.from_ambient_jacobian(p), u1(np.asarray(x, dtype=float)))

    return CauchyData(phi0, phi1, L)


def derivative4(f, x, step, L=None):
    """Fourth-order difference of a curve given as a callable.

    Central where the stencil stays inside |x| <= L, one-sided otherwise.
    """
    x = np.asarray(x, dtype=float)
    out = (-f(x + 2 * step) + 8 * f(x + step) - 8 * f(x - step) + f(x - 2 * step)) / (12 * step)
    if L is None:
        return out
    coef = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * step)
    for side, sel in ((1.0, x - 2 * step < -L), (-1.0, x + 2 * step > L)):
        if np.any(sel):
            xs = x[sel]
            out[sel] = side * sum(c * f(xs + side * m * step) for m, c in enumerate(coef))
    return out


def _empty(grid, n):
    return np.full((grid.P + 1, grid.P + 1, n), np.nan)


def to_characteristic_data(data: CauchyData, grid: TriangleGrid, chart: Chart | None = None):
    """Base-line values y = z = phi0, u = phi0' + phi1, v = phi1 - phi0'.

    Only the base line (t = 0) is populated; the rest of the state is NaN.
    """
    x = grid.base_x
    step = grid.h
    if np.max(np.abs(x)) > data.L * (1 + 1e-12):
        raise InsufficientSamples(
            f"grid needs data on |x| <= {np.max(np.abs(x)):.6g} but it is given on |x| <= {data.L}"
        )
    y0 = np.asarray(data.phi0(x), dtype=float)
    if chart is not None:
        chart.check_domain(y0)
    L = data.L * (1 + 1e-12)
    dphi = derivative4(lambda s: np.asarray(data.phi0(s), dtype=float), x, min(step, L / 4), L)
    phi1 = np.asarray(data.phi1(x), dtype=float)
    n = y0.shape[-1]
    state = CharacteristicState(grid, _empty(grid, n), _empty(grid, n), _empty(grid, n), _empty(grid, n))
    return with_base(state, y0, y0, dphi + phi1, phi1 - dphi)


def with_base(state: CharacteristicState, y0, z0, u0, v0):
    i = np.arange(state.grid.P + 1)
    state.y[i, i], state.z[i, i], state.u[i, i], state.v[i, i] = y0, z0, u0, v0
    return state


def compute_bounds(data: CauchyData, chart: Chart, samples=2001) -> TriangleParams:
    """Ellipticity a, derivative bound M and triangle size k = min{L, a / (2 M sqrt n)}.

    M is the largest chart-metric norm of the initial lightcone derivatives
    phi0' +- phi1 over |x| <= L. With M = 0 the data is constant and k = L.
    """
    L = data.L
    step = 1e-3 * L
    x = np.linspace(-L, L, samples)
    y0 = np.asarray(data.phi0(x), dtype=float)
    dphi = derivative4(lambda s: np.asarray(data.phi0(s), dtype=float), x, step, L * (1 + 1e-12))
    phi1 = np.asarray(data.phi1(x), dtype=float)
    g = chart.metric(y0)
    norms = [np.sqrt(np.einsum("...i,...ij,...j->...", w, g, w)) for w in (dphi + phi1, phi1 - dphi)]
    M = float(max(np.max(nrm) for nrm in norms))
    a = chart.ellipticity()
    n = chart.n
    k = L if M == 0.0 else min(L, a / (2 * M * math.sqrt(n)))
    return TriangleParams(L, a, M, n, k)


def triangle_size(a, M, n, L):
    return L if M == 0.0 else min(L, a / (2 * M * math.sqrt(n)))


def initial_iterate(state: CharacteristicState) -> CharacteristicState:
    """Zeroth iterate: u constant along eta, v constant along xi, y and z integrated."""
    g = state.grid
    h = g.h
    y0, z0, u0, v0 = state.base()
    U = np.concatenate([np.zeros((1, state.n)), np.cumsum(0.5 * h * (u0[1:] + u0[:-1]), axis=0)])
    W = np.concatenate([np.zeros((1, state.n)), np.cumsum(0.5 * h * (v0[1:] + v0[:-1]), axis=0)])
    i, j = np.nonzero(g.mask())
    out = state.copy()
    out.u[i, j] = u0[i]
    out.v[i, j] = v0[j]
    out.y[i, j] = y0[j] + U[i] - U[j]
    out.z[i, j] = z0[i] + W[i] - W[j]
    return out


def _coefficients(points, chart: Chart, B: TwoFormPotential):
    gam = christoffel(chart, points)
    zc = B.z_chart_components(chart, points)
    return gam, zc


def transport_matrices(state: CharacteristicState, chart: Chart, B: TwoFormPotential):
    """Matrices A (eta-transport of u) and Bm (xi-transport of v) at every node.

    d_eta u = -A u with A^i_a = Gamma^i_ab(z) v^b + 1/2 Z^i_ab(z) v^b,
    d_xi v = -Bm v with Bm^i_a = Gamma^i_ab(y) u^b + 1/2 Z^i_ba(y) u^b.
    """
    g = state.grid
    n = state.n
    i, j = np.nonzero(g.mask())
    A = np.zeros((g.P + 1, g.P + 1, n, n))
    Bm = np.zeros_like(A)
    z, y, u, v = state.z[i, j], state.y[i, j], state.u[i, j], state.v[i, j]
    gz, zz = _coefficients(z, chart, B)
    gy, zy = _coefficients(y, chart, B)
    A[i, j] = np.einsum("nijk,nk->nij", gz + 0.5 * zz, v)
    Bm[i, j] = np.einsum("nijk,nk->nij", gy, u) + 0.5 * np.einsum("nikj,nk->nij", zy, u)
    return A, Bm


def picard_sweep(prev: CharacteristicState, chart: Chart, B: TwoFormPotential):
    """One linear transport solve with coefficients frozen at ``prev``.

    Fills the region level by level in t; returns (new state, sup change).
    """
    g = prev.grid
    n = prev.n
    h = g.h
    A, Bm = transport_matrices(prev, chart, B)
    new = prev.copy()
    eye = np.eye(n)
    for ell in range(1, g.levels + 1):
        i, j = g.level(ell)
        try:
            u_rhs = np.einsum("nab,nb->na", eye - 0.5 * h * A[i, j + 1], new.u[i, j + 1])
            new.u[i, j] = np.linalg.solve(eye + 0.5 * h * A[i, j], u_rhs[..., None])[..., 0]
            v_rhs = np.einsum("nab,nb->na", eye - 0.5 * h * Bm[i - 1, j], new.v[i - 1, j])
            new.v[i, j] = np.linalg.solve(eye + 0.5 * h * Bm[i, j], v_rhs[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise LinearSolveFailure(f"singular trapezoidal step on level {ell}") from exc
        new.y[i, j] = new.y[i - 1, j] + 0.5 * h * (new.u[i - 1, j] + new.u[i, j])
        new.z[i, j] = new.z[i, j + 1] + 0.5 * h * (new.v[i, j + 1] + new.v[i, j])
    mask = g.mask()
    for arr in (new.y, new.z):
        if not np.all(chart.contains(arr[mask])):
            raise ChartDomainExceeded("iterate left the chart; shrink the triangle size k")
    delta = max(float(np.max(np.abs(a[mask] - b[mask]))) for a, b in zip(
        (new.y, new.z, new.u, new.v), (prev.y, prev.z, prev.u, prev.v)))
    return new, delta


@dataclass
class TriangleSolution:
    state: CharacteristicState
    deltas: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.deltas)


def solve_triangle(initial: CharacteristicState, chart: Chart, B: TwoFormPotential,
                   tol_fix=TOL_FIX, max_iter=MAX_ITER) -> TriangleSolution:
    """Iterate Picard sweeps from the base data until the change drops below tol_fix."""
    state = initial_iterate(initial)
    deltas = []
    for _ in range(max_iter):
        state, delta = picard_sweep(state, chart, B)
        deltas.append(delta)
        log.debug("picard sweep %d: delta = %.3e", len(deltas), delta)
        if delta < tol_fix:
            return TriangleSolution(state, deltas)
    raise NoConvergence(
        f"no convergence after {max_iter} sweeps (last delta {deltas[-1]:.3e})",
        last_delta=deltas[-1],
        iterations=len(deltas),
    )


# --- verification quantities ------------------------------------------------


def system_residual(state: CharacteristicState, chart: Chart, B: TwoFormPotential):
    """Sup-norm defects of the four equations with centred difference quotients.

    Evaluated at nodes whose two neighbours along the relevant characteristic
    are inside the solved region. Returns a dict with keys u, v, y, z, max.
    """
    g = state.grid
    h = g.h
    A, Bm = transport_matrices(state, chart, B)
    mask = g.mask()
    P = g.P
    out = {}
    # eta-direction neighbours (i, j - 1) and (i, j + 1)
    i, j = np.nonzero(mask)
    sel = (j >= 1) & (j + 1 <= i) & (i - (j - 1) <= g.levels)
    ie, je = i[sel], j[sel]
    du = (state.u[ie, je - 1] - state.u[ie, je + 1]) / (2 * h)
    out["u"] = _sup(du + np.einsum("nab,nb->na", A[ie, je], state.u[ie, je]))
    dz = (state.z[ie, je - 1] - state.z[ie, je + 1]) / (2 * h)
    out["z"] = _sup(dz - state.v[ie, je])
    # xi-direction neighbours (i - 1, j) and (i + 1, j)
    sel = (i + 1 <= P) & (i - 1 >= j) & (i + 1 - j <= g.levels)
    ix, jx = i[sel], j[sel]
    dv = (state.v[ix + 1, jx] - state.v[ix - 1, jx]) / (2 * h)
    out["v"] = _sup(dv + np.einsum("nab,nb->na", Bm[ix, jx], state.v[ix, jx]))
    dy = (state.y[ix + 1, jx] - state.y[ix - 1, jx]) / (2 * h)
    out["y"] = _sup(dy - state.u[ix, jx])
    out["max"] = max(out.values())
    return out


def _sup(a):
    return float(np.max(np.abs(a))) if a.size else 0.0


def yz_gap(state: CharacteristicState):
    mask = state.grid.mask()
    return float(np.max(np.abs(state.y[mask] - state.z[mask])))


def isometry_drift(state: CharacteristicState, chart: Chart):
    """Largest change of g(z)(u, u) along eta-lines and g(y)(v, v) along xi-lines."""
    g = state.grid
    i, j = np.nonzero(g.mask())

    def gnorm2(pos, w):
        return np.einsum("na,nab,nb->n", w, chart.metric(pos), w)

    nu = gnorm2(state.z[i, j], state.u[i, j])
    nu0 = gnorm2(state.z[i, i], state.u[i, i])
    nv = gnorm2(state.y[i, j], state.v[i, j])
    nv0 = gnorm2(state.y[j, j], state.v[j, j])
    return max(_sup(nu - nu0), _sup(nv - nv0))


def derivative_bound(state: CharacteristicState):
    mask = state.grid.mask()
    return float(max(np.max(np.abs(state.u[mask])), np.max(np.abs(state.v[mask]))))


def node_values(state: CharacteristicState):
    """Flattened solved nodes: arrays t, x, xi, eta, y, z, u, v."""
    g = state.grid
    i, j = np.nonzero(g.mask())
    t, x = g.tx(i, j)
    return {
        "i": i, "j": j, "t": t, "x": x, "xi": g.xi[i], "eta": g.eta[j],
        "y": state.y[i, j], "z": state.z[i, j], "u": state.u[i, j], "v": state.v[i, j],
    }


# --- global extension ----------------------------------------------------------


@dataclass
class Stage:
    t0: float
    solution: TriangleSolution


@dataclass
class GlobalSolution:
    stages: list
    t_reached: float
    exhausted: bool
    report: str
    params: TriangleParams | None = None
    h: float = 0.0

    def sample(self, t, x, tol=1e-9):
        """Chart position (y + z)/2 at a solved node (t, x)."""
        for st in self.stages:
            g = st.solution.state.grid
            ell = (t - st.t0) / g.h
            if ell < -tol or ell > g.levels + tol:
                continue
            ell = int(round(ell))
            s = (x - g.x_left) / g.h
            i2 = int(round(s))
            if abs(s - i2) > tol or (i2 + ell) % 2:
                continue
            i, j = (i2 + ell) // 2, (i2 - ell) // 2
            if 0 <= j <= i <= g.P:
                sol = st.solution.state
                return 0.5 * (sol.y[i, j] + sol.z[i, j])
        raise KeyError(f"({t}, {x}) is not a solved node")


def extend_global(data: CauchyData, chart: Chart, B: TwoFormPotential, t_final: float, n_char: int,
                  k: float | None = None, tol_fix=TOL_FIX, max_iter=MAX_ITER, strict=False) -> GlobalSolution:
    """Solve up to t_final by restarting from the top line of each strip.

    Every stage solves a strip of height k over the current window; the
    next stage starts from the strip's top line, whose window is narrower by
    k on each side. When the window empties before t_final the run stops with
    ``exhausted`` set (or WindowExhausted if ``strict``).
    """
    params = compute_bounds(data, chart)
    if k is None:
        k = K_SAFETY * params.k
    elif k > params.k * (1 + 1e-12):
        log.warning("triangle size %.4g exceeds the bound %.4g", k, params.k)
    h = k / n_char
    P = int(math.floor(data.L / h + 1e-9))
    grid = TriangleGrid(-P * h, h, P, 0)
    base = to_characteristic_data(data, grid, chart)
    y0, z0, u0, v0 = base.base()
    total_levels = int(round(t_final / h))
    done = 0
    stages = []
    x_left = grid.x_left
    while done < total_levels:
        if P <= 0:
            break
        levels = min(n_char, total_levels - done, P)
        grid = TriangleGrid(x_left, h, P, levels)
        n = y0.shape[-1]
        init = with_base(CharacteristicState(grid, _empty(grid, n), _empty(grid, n), _empty(grid, n),
                                             _empty(grid, n)), y0, z0, u0, v0)
        sol = solve_triangle(init, chart, B, tol_fix, max_iter)
        stages.append(Stage(done * h, sol))
        i, j = grid.level(levels)
        st = sol.state
        y0, z0, u0, v0 = st.y[i, j], st.z[i, j], st.u[i, j], st.v[i, j]
        done += levels
        P -= levels
        x_left += levels * h
    t_reached = done * h
    exhausted = done < total_levels
    report = (f"window exhausted at t = {t_reached:.6g} before t_final = {t_final:.6g}"
              if exhausted else f"reached t = {t_reached:.6g} in {len(stages)} stages")
    if exhausted and strict:
        raise WindowExhausted(report)
    return GlobalSolution(stages, t_reached, exhausted, report, params, h)


def ambient_nodes(state: CharacteristicState, chart: Chart):
    """Solved nodes mapped to the ambient space: arrays t, x and p = embed((y + z)/2)."""
    nv = node_values(state)
    return nv["t"], nv["x"], chart.embed(0.5 * (nv["y"] + nv["z"]))


def compare_with_trajectory(state: CharacteristicState, chart: Chart, traj, t_tol=1e-9):
    """Sup distance between lightcone nodes and an extrinsic trajectory.

    The trajectory must hold snapshots at every level time of the lightcone
    grid; it is interpolated in x by a periodic cubic spline.
    """
    from scipy.interpolate import CubicSpline

    t, x, p = ambient_nodes(state, chart)
    g = traj.grid
    xs = np.append(g.x, g.x_max)
    span = g.x_max - g.x_min
    err = 0.0
    for ell in range(state.grid.levels + 1):
        sel = np.abs(t - ell * state.grid.h) < t_tol
        snap = min(traj.states, key=lambda s: abs(s.t - ell * state.grid.h))
        if abs(snap.t - ell * state.grid.h) > t_tol * max(1.0, snap.t):
            raise KeyError(f"no snapshot at t = {ell * state.grid.h}")
        spline = CubicSpline(xs, np.vstack([snap.u, snap.u[:1]]), bc_type="periodic")
        xq = g.x_min + np.mod(x[sel] - g.x_min, span)
        err = max(err, float(np.max(np.abs(spline(xq) - p[sel]))))
    return err
