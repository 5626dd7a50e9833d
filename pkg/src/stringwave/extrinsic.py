"""Extrinsic solver for  u_tt - u_xx = II(du, du) + Z(u_t ^ u_x) + grad V(u).

Explicit leapfrog in time with a centred-velocity corrector, followed by
nearest-point projection onto the target after every step.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics as diag
from .errors import BlowupDetected, CFLViolation, ResampleOutOfRange, SolverError
from .geometry import TargetManifold
from .potentials import ScalarPotential, TwoFormPotential
from .stencils import d2_dx2, d_dx

log = logging.getLogger(__name__)

CFL_MAX = 0.5
BLOWUP_THRESHOLD = 1e6


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid. Periodic grids hold ``nx`` points, fixed-end grids ``nx + 1``."""

    x_min: float
    x_max: float
    nx: int
    dt: float
    t_final: float
    boundary: str = "periodic"
    cfl_max: float = CFL_MAX

    @classmethod
    def from_cfl(cls, x_min, x_max, nx, cfl, t_final, boundary="periodic", cfl_max=CFL_MAX):
        """Largest dt with dt/dx <= cfl that divides t_final into whole steps."""
        dx = (x_max - x_min) / nx
        n_steps = max(1, math.ceil(t_final / (cfl * dx) - 1e-9))
        return cls(x_min, x_max, nx, t_final / n_steps, t_final, boundary, cfl_max)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.nx

    @property
    def periodic(self):
        return self.boundary == "periodic"

    @property
    def x(self):
        npts = self.nx if self.periodic else self.nx + 1
        return self.x_min + self.dx * np.arange(npts)

    @property
    def cfl(self):
        return self.dt / self.dx

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))

    def check_cfl(self):
        if self.cfl > self.cfl_max * (1 + 1e-12):
            raise CFLViolation(f"dt/dx = {self.cfl:.4g} exceeds the bound {self.cfl_max}")


@dataclass(frozen=True)
class FieldState:
    t: float
    u: np.ndarray
    ut: np.ndarray


@dataclass
class Trajectory:
    grid: GridSpec
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    diagnostics: diag.DiagnosticSeries | None = None
    failure: str | None = None
    apriori_inequality: tuple | None = None

    @property
    def ok(self):
        return self.failure is None

    def state_at(self, t, tol=1e-9):
        for s in self.states:
            if abs(s.t - t) <= tol * max(1.0, abs(t)):
                return s
        raise KeyError(f"no snapshot at t={t}")


@dataclass(frozen=True)
class Physics:
    target: TargetManifold
    two_form: TwoFormPotential = TwoFormPotential()
    potential: ScalarPotential = ScalarPotential()


def rhs(state: FieldState, m: TargetManifold, B: TwoFormPotential, V: ScalarPotential, grid: GridSpec):
    """Pointwise II(u_t,u_t) - II(u_x,u_x) + Z(u_t ^ u_x) + grad V(u)."""
    u, ut = state.u, state.ut
    ux = d_dx(u, grid.dx, grid.periodic)
    out = m.second_fundamental_form(u, ut, ut, check=False)
    out -= m.second_fundamental_form(u, ux, ux, check=False)
    if not B.is_zero:
        out += B.z_extended(m, u, ut, ux)
    if not V.is_zero:
        p = m.project_point(u)
        out += m.project_tangent(p, V.ambient_gradient(p), check=False)
    return out


def _acceleration(u, ut, grid, phys):
    s = FieldState(0.0, u, ut)
    return d2_dx2(u, grid.dx, grid.periodic) + rhs(s, phys.target, phys.two_form, phys.potential, grid)


def _finish(u_new, ut_new, t, grid, m, fixed):
    u_new = m.project_point(u_new)
    ut_new = m.project_tangent(u_new, ut_new, check=False)
    if fixed is not None:
        u_new[0], u_new[-1] = fixed
        ut_new[0] = ut_new[-1] = 0.0
    vmax = float(np.max(np.abs(ut_new)))
    if not np.isfinite(vmax) or vmax > BLOWUP_THRESHOLD:
        raise BlowupDetected(f"max |u_t| = {vmax:.3e} at t = {t:.6g}")
    return FieldState(t, u_new, ut_new)


def step(state: FieldState, prev: FieldState | None, grid: GridSpec, m, B, V) -> FieldState:
    """Advance one time step.

    With ``prev`` None the step is the second-order Taylor start from
    (u0, u1); otherwise a leapfrog step whose velocity-dependent forcing is
    re-evaluated once with the centred velocity (u^{m+1} - u^{m-1}) / 2dt.
    """
    grid.check_cfl()
    phys = Physics(m, B, V)
    dt = grid.dt
    u, ut = state.u, state.ut
    fixed = None if grid.periodic else (u[0].copy(), u[-1].copy())
    if prev is None:
        acc = _acceleration(u, ut, grid, phys)
        u_new = u + dt * ut + 0.5 * dt**2 * acc
        ut_new = ut + dt * acc
        return _finish(u_new, ut_new, state.t + dt, grid, m, fixed)
    u_old = prev.u
    acc = _acceleration(u, ut, grid, phys)
    u_pred = 2 * u - u_old + dt**2 * acc
    ut_mid = m.project_tangent(u, (u_pred - u_old) / (2 * dt), check=False)
    acc = _acceleration(u, ut_mid, grid, phys)
    u_new = m.project_point(2 * u - u_old + dt**2 * acc)
    ut_new = (3 * u_new - 4 * u + u_old) / (2 * dt)
    return _finish(u_new, ut_new, state.t + dt, grid, m, fixed)


def initial_state(u0, u1, grid: GridSpec, m: TargetManifold) -> FieldState:
    """Sample (or accept arrays of) initial data and make it admissible."""
    x = grid.x
    u = np.asarray(u0(x) if callable(u0) else u0, dtype=float)
    ut = np.asarray(u1(x) if callable(u1) else u1, dtype=float)
    u = m.project_point(u)
    ut = m.project_tangent(u, ut, check=False)
    return FieldState(0.0, u, ut)


def centred_velocity(prev: FieldState, cur: FieldState, new: FieldState, m: TargetManifold, fixed=False):
    """Final velocity of ``cur``: tangent part of (u^{m+1} - u^{m-1}) / 2dt."""
    ut = m.project_tangent(cur.u, (new.u - prev.u) / (new.t - prev.t), check=False)
    if fixed:
        ut[0] = ut[-1] = 0.0
    return FieldState(cur.t, cur.u, ut)


def solve(
    u0,
    u1,
    grid: GridSpec,
    m: TargetManifold,
    B: TwoFormPotential = TwoFormPotential(),
    V: ScalarPotential = ScalarPotential(),
    snapshot_every: int = 1,
    apriori: bool = False,
    record_diagnostics: bool = True,
) -> Trajectory:
    """Integrate to ``grid.t_final``; never raises on solver faults.

    Each state's velocity is finalised by the centred difference once its
    successor exists. A failing step ends the run and the partial trajectory is
    returned with ``failure`` describing the fault.
    """
    grid.check_cfl()
    n_steps = grid.n_steps
    if n_steps < 2:
        raise SolverError("need at least two time steps")
    traj = Trajectory(grid)
    recorder = diag.Recorder(grid, m, B, V, apriori=apriori) if record_diagnostics else None
    window = deque(maxlen=3)

    def emit(s, index):
        if index % snapshot_every == 0 or index == n_steps:
            traj.times.append(s.t)
            traj.states.append(s)
        window.append(s)
        if recorder and len(window) == 3:
            recorder.push(tuple(window))

    first = initial_state(u0, u1, grid, m)
    if recorder:
        recorder.start(first)
    prev, cur = None, first
    # one step past t_final, discarded, gives the last state a centred velocity
    for index in range(1, n_steps + 2):
        try:
            new = step(cur, prev, grid, m, B, V)
        except SolverError as exc:
            if index <= n_steps:
                traj.failure = f"{type(exc).__name__}: {exc}"
                log.warning("solve stopped at step %d: %s", index, traj.failure)
            break
        if prev is not None:
            cur = centred_velocity(prev, cur, new, m, fixed=not grid.periodic)
        emit(cur, index - 1)
        if index == n_steps + 1:
            cur = None
            break
        prev, cur = cur, new
    if cur is not None:
        emit(cur, index - 1 if traj.failure else n_steps)
    if recorder:
        traj.diagnostics = recorder.finish()
        if apriori:
            traj.apriori_inequality = recorder.apriori_inequality()
    return traj


def rescaled_grid(grid: GridSpec, lam: float) -> GridSpec:
    return replace(
        grid, x_min=grid.x_min / lam, x_max=grid.x_max / lam, dt=grid.dt / lam, t_final=grid.t_final / lam
    )


def scaling_transform(traj: Trajectory, lam: float, beta: float = 0.0, target_grid: GridSpec | None = None):
    """Return the trajectory of u_lam(t, x) = lam^beta u(lam t, lam x).

    Without ``target_grid`` the result lives on the grid scaled by 1/lam, so
    samples are exact. With one, every snapshot is resampled in space by a
    periodic cubic spline; the target's snapshot times must be available.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    g = traj.grid
    new_grid = rescaled_grid(g, lam)
    states = [
        FieldState(s.t / lam, lam**beta * s.u, lam ** (beta + 1) * s.ut) for s in traj.states
    ]
    out = Trajectory(new_grid, [s.t for s in states], states, None, traj.failure)
    if target_grid is None:
        return out
    return resample(out, target_grid)


def resample(traj: Trajectory, target: GridSpec) -> Trajectory:
    from scipy.interpolate import CubicSpline

    src = traj.grid
    lo, hi = target.x[0], target.x[-1]
    span = src.x_max - src.x_min
    if not src.periodic and (lo < src.x[0] - 1e-12 or hi > src.x[-1] + 1e-12):
        raise ResampleOutOfRange(f"target [{lo}, {hi}] outside source grid")
    xs = np.append(src.x, src.x_max) if src.periodic else src.x
    states = []
    for s in traj.states:
        if s.t > target.t_final * (1 + 1e-12) + 1e-14:
            continue
        u = np.vstack([s.u, s.u[:1]]) if src.periodic else s.u
        ut = np.vstack([s.ut, s.ut[:1]]) if src.periodic else s.ut
        bc = "periodic" if src.periodic else "not-a-knot"
        xt = target.x
        if src.periodic:
            xt = src.x_min + np.mod(xt - src.x_min, span)
        states.append(FieldState(s.t, CubicSpline(xs, u, bc_type=bc)(xt), CubicSpline(xs, ut, bc_type=bc)(xt)))
    return Trajectory(target, [s.t for s in states], states, None, traj.failure)
