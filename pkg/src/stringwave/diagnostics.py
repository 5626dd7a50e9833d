"""Conserved quantities, conservation-law residuals and a priori functionals.

Single-slice quantities take a state with attributes ``u`` and ``ut`` (the
extrinsic solver's FieldState). Windowed quantities take three consecutive
slices ``(prev, cur, next)`` and use centred differences in t and x, the
same second-order stencils the solver uses.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoPrimitiveAvailable
from .potentials import ScalarPotential, TwoFormPotential
from .stencils import d2_dx2, d_dx, integrate, l2_norm, quad_weights, sq_norm

COLUMNS = (
    "t",
    "E",
    "E2",
    "action_density_integral",
    "res_F_plus",
    "res_F_minus",
    "res_box_e",
    "res_stress_div",
    "apriori_Z",
    "apriori_bound",
    "E_half",
)


@dataclass
class DiagnosticSeries:
    rows: list = field(default_factory=list)

    def column(self, name):
        i = COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            for row in self.rows:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != COLUMNS:
                raise ValueError(f"unexpected diagnostics header {header}")
            return cls([tuple(float(v) for v in row) for row in reader])


def _v(V: ScalarPotential, u):
    return V.value(u) if not V.is_zero else np.zeros(u.shape[0])


def _dt(window):
    return window[2].t - window[1].t


# --- single-slice quantities ---------------------------------------------


def energy_total(state, V: ScalarPotential, grid) -> float:
    """E = int |u_t|^2 + |u_x|^2 - 2 V(u) dx (trapezoidal rule)."""
    ux = d_dx(state.u, grid.dx, grid.periodic)
    dens = sq_norm(state.ut) + sq_norm(ux) - 2 * _v(V, state.u)
    return integrate(dens, grid.dx, grid.periodic)


def energy_density(state, grid):
    ux = d_dx(state.u, grid.dx, grid.periodic)
    return 0.5 * sq_norm(state.ut) + 0.5 * sq_norm(ux)


def energy_half(state, grid) -> float:
    """The potential-free energy 1/2 int |u_t|^2 + |u_x|^2 dx."""
    return integrate(energy_density(state, grid), grid.dx, grid.periodic)


def flux_terms(state, grid):
    """Pointwise F_+^2 and F_-^2 with F_pm = u_t +- u_x."""
    ux = d_dx(state.u, grid.dx, grid.periodic)
    return sq_norm(state.ut + ux), sq_norm(state.ut - ux)


def stress_tensor(state, V: ScalarPotential, grid):
    """Components (T_tt, T_tx, T_xx) with domain metric diag(+1, -1).

    T_ab = 1/2 h_ab |dphi|^2 - <dphi(e_a), dphi(e_b)> + V h_ab.
    """
    ux = d_dx(state.u, grid.dx, grid.periodic)
    ut2, ux2 = sq_norm(state.ut), sq_norm(ux)
    v = _v(V, state.u)
    dphi2 = ut2 - ux2
    t_tt = 0.5 * dphi2 - ut2 + v
    t_tx = -np.sum(state.ut * ux, axis=-1)
    t_xx = -0.5 * dphi2 - ux2 - v
    return t_tt, t_tx, t_xx


def b_pullback_density(state, B: TwoFormPotential, grid):
    """phi^*B (d_t, d_x) for the primitive B = c x^1 dx^2 ^ dx^3 of c dx^dy^dz."""
    if B.is_zero:
        return np.zeros(state.u.shape[0])
    if B.kind != "constant_volume3":
        raise NoPrimitiveAvailable(f"no explicit primitive for two-form {B.kind!r}")
    u, ut = state.u, state.ut
    ux = d_dx(u, grid.dx, grid.periodic)
    return B.c * u[:, 0] * (ut[:, 1] * ux[:, 2] - ut[:, 2] * ux[:, 1])


def lagrangian_density(state, B: TwoFormPotential, V: ScalarPotential, grid):
    ux = d_dx(state.u, grid.dx, grid.periodic)
    return 0.5 * (sq_norm(state.ut) - sq_norm(ux)) + b_pullback_density(state, B, grid) + _v(V, state.u)


def apriori_functional(state, V: ScalarPotential, grid, energy0: float):
    """Interaction functional int int_{x >= y} a(x) b(y) dx dy and its bound 4 E(0)^2.

    a = F_-^2 - 2V, b = F_+^2 - 2V. Evaluated in O(Nx) with a running
    trapezoidal sum; the diagonal x = y carries half weight.
    """
    fp, fm = flux_terms(state, grid)
    v = _v(V, state.u)
    a = fm - 2 * v
    b = fp - 2 * v
    w = quad_weights(a.shape[0], grid.dx, grid.periodic)
    wb = w * b
    below = np.cumsum(wb) - wb  # sum over y strictly less than x
    z = float(np.sum(w * a * (below + 0.5 * wb)))
    return z, 4.0 * energy0**2


def apriori_inequality_rhs(state0, V: ScalarPotential, grid, energy0: float) -> float:
    """2 E(0)^2 + 2 int int_{x >= y} V(u(x)) (|u_x|^2 + |u_t|^2)(y) dx dy at t = 0."""
    v = _v(V, state0.u)
    e2 = 2 * energy_density(state0, grid)
    w = quad_weights(v.shape[0], grid.dx, grid.periodic)
    we = w * e2
    below = np.cumsum(we) - we
    return 2 * energy0**2 + 2 * float(np.sum(w * v * (below + 0.5 * we)))


def apriori_inequality_density(state, V: ScalarPotential, grid) -> float:
    """int F_-^2 F_+^2 - 4 V^2 dx at one time; its time integral is the left side."""
    fp, fm = flux_terms(state, grid)
    v = _v(V, state.u)
    return integrate(fm * fp - 4 * v * v, grid.dx, grid.periodic)


# --- windowed quantities ---------------------------------------------------


def flux_residuals(window, V: ScalarPotential, grid):
    """L2 defects of d_t(F_pm^2 - 2V) -+ d_x(F_pm^2 + 2V) at the middle slice."""
    prev, cur, nxt = window
    dt = _dt(window)
    fp0, fm0 = flux_terms(prev, grid)
    fp1, fm1 = flux_terms(cur, grid)
    fp2, fm2 = flux_terms(nxt, grid)
    v0, v1, v2 = (_v(V, s.u) for s in window)
    dtv = (v2 - v0) / (2 * dt)
    res_p = (fp2 - fp0) / (2 * dt) - 2 * dtv - d_dx(fp1 + 2 * v1, grid.dx, grid.periodic)
    res_m = (fm2 - fm0) / (2 * dt) - 2 * dtv + d_dx(fm1 + 2 * v1, grid.dx, grid.periodic)
    return l2_norm(res_p, grid.dx, grid.periodic), l2_norm(res_m, grid.dx, grid.periodic)


def box_energy_residual(window, V: ScalarPotential, grid) -> float:
    """L2 norm of (d_t^2 - d_x^2) e - (d_x^2 + d_t^2) V(u)."""
    dt = _dt(window)
    e0, e1, e2 = (energy_density(s, grid) for s in window)
    v0, v1, v2 = (_v(V, s.u) for s in window)
    box_e = (e2 - 2 * e1 + e0) / dt**2 - d2_dx2(e1, grid.dx, grid.periodic)
    source = (v2 - 2 * v1 + v0) / dt**2 + d2_dx2(v1, grid.dx, grid.periodic)
    return l2_norm(box_e - source, grid.dx, grid.periodic)


def stress_divergence_residual(window, V: ScalarPotential, grid) -> float:
    """L2 norm of d^a T_ab = d_t T_tb - d_x T_xb, both components."""
    dt = _dt(window)
    (tt0, tx0, _), (tt1, tx1, xx1), (tt2, tx2, _) = (stress_tensor(s, V, grid) for s in window)
    div_t = (tt2 - tt0) / (2 * dt) - d_dx(tx1, grid.dx, grid.periodic)
    div_x = (tx2 - tx0) / (2 * dt) - d_dx(xx1, grid.dx, grid.periodic)
    return math.hypot(l2_norm(div_t, grid.dx, grid.periodic), l2_norm(div_x, grid.dx, grid.periodic))


def h2_energy(window, grid) -> float:
    """E2 = 1/2 int |u_xx|^2 + 2 |u_xt|^2 + |u_tt|^2 dx at the middle slice."""
    prev, cur, nxt = window
    dt = _dt(window)
    uxx = d2_dx2(cur.u, grid.dx, grid.periodic)
    uxt = d_dx(cur.ut, grid.dx, grid.periodic)
    utt = (nxt.u - 2 * cur.u + prev.u) / dt**2
    dens = sq_norm(uxx) + 2 * sq_norm(uxt) + sq_norm(utt)
    return 0.5 * integrate(dens, grid.dx, grid.periodic)


def el_residual(window, m, B, V, grid) -> float:
    """L2 norm of u_tt - u_xx - II(du,du) - Z(u_t ^ u_x) - grad V at the middle slice."""
    from .extrinsic import rhs

    prev, cur, nxt = window
    dt = _dt(window)
    utt = (nxt.u - 2 * cur.u + prev.u) / dt**2
    res = utt - d2_dx2(cur.u, grid.dx, grid.periodic) - rhs(cur, m, B, V, grid)
    return l2_norm(res, grid.dx, grid.periodic)


def action_integral(states, B: TwoFormPotential, V: ScalarPotential, grid) -> float:
    """Spacetime trapezoidal quadrature of 1/2 |dphi|^2 + phi^*B + V(phi)."""
    if B.kind == "sphere3_volume" and not B.is_zero:
        raise NoPrimitiveAvailable("the sphere volume form has no global primitive")
    times = np.array([s.t for s in states])
    dens = np.array([integrate(lagrangian_density(s, B, V, grid), grid.dx, grid.periodic) for s in states])
    return float(np.trapezoid(dens, times))


def gronwall_envelope(times, values, t_fit, margin=0.0):
    """Fit C1 exp(C2 t) to the early part (t <= t_fit) of a positive series.

    C1 is the initial value, C2 the smallest rate dominating the early
    samples. Returns (C1, C2, holds) where holds reports whether the whole
    series stays under the envelope.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    c1 = values[0] * (1 + margin)
    early = (times > 0) & (times <= t_fit)
    rates = np.log(values[early] / c1) / times[early]
    c2 = max(0.0, float(np.max(rates))) if rates.size else 0.0
    holds = bool(np.all(np.log(values) <= np.log(c1) + c2 * times + 1e-12))
    return c1, c2, holds


class Recorder:
    """Accumulates one DiagnosticSeries row per solver step.

    Each row's windowed columns use the centred window around its step; the
    first and last steps reuse the nearest centred window.
    """

    def __init__(self, grid, m, B, V, apriori=False):
        self.grid, self.m, self.B, self.V = grid, m, B, V
        self.apriori = apriori
        self.series = DiagnosticSeries()
        self._last_window = None
        self.energy0 = None
        self.state0 = None
        self.apriori_lhs = 0.0
        self._apriori_prev = None

    def start(self, state0):
        self.state0 = state0
        self.energy0 = energy_total(state0, self.V, self.grid)

    def _action_column(self, state, window):
        if self.B.kind == "sphere3_volume" and not self.B.is_zero:
            return el_residual(window, self.m, self.B, self.V, self.grid)
        return integrate(lagrangian_density(state, self.B, self.V, self.grid), self.grid.dx, self.grid.periodic)

    def _row(self, state, window):
        g, V = self.grid, self.V
        fp, fm = flux_residuals(window, V, g)
        if self.apriori:
            z, bound = apriori_functional(state, V, g, self.energy0)
            dens = apriori_inequality_density(state, V, g)
            if self._apriori_prev is not None:
                t0, d0 = self._apriori_prev
                self.apriori_lhs += 0.5 * (dens + d0) * (state.t - t0)
            self._apriori_prev = (state.t, dens)
        else:
            z = bound = float("nan")
        return (
            state.t,
            energy_total(state, V, g),
            h2_energy(window, g),
            self._action_column(state, window),
            fp,
            fm,
            box_energy_residual(window, V, g),
            stress_divergence_residual(window, V, g),
            z,
            bound,
            energy_half(state, g),
        )

    def push(self, window):
        if self._last_window is None:
            self.series.rows.append(self._row(window[0], window))
        self.series.rows.append(self._row(window[1], window))
        self._last_window = window

    def finish(self):
        if self._last_window is not None:
            w = self._last_window
            self.series.rows.append(self._row(w[2], w))
        return self.series

    def apriori_inequality(self):
        """(left side accumulated over the run, right side from t = 0)."""
        rhs = apriori_inequality_rhs(self.state0, self.V, self.grid, self.energy0)
        return self.apriori_lhs, rhs
