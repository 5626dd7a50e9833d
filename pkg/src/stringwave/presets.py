"""Initial-data presets: ambient curves u0(x) and tangent fields u1(x) on a target."""
from __future__ import annotations

import numpy as np

from .geometry import TargetManifold

PRESETS = ("constant", "gaussian_bump", "sine_mode", "geodesic")


def default_base(m: TargetManifold):
    """Origin for flat targets, the north pole r e_q for spheres."""
    base = np.zeros(m.ambient_dim)
    if m.kind == "sphere":
        base[-1] = m.radius
    return base


def _vec(m, value, default=None):
    if value is None or len(value) == 0:
        return np.zeros(m.ambient_dim) if default is None else np.asarray(default, dtype=float)
    out = np.zeros(m.ambient_dim)
    out[: len(value)] = value
    return out


def _modes(m, modes, x):
    out = np.zeros(np.shape(x) + (m.ambient_dim,))
    for comp, amp, wave, phase in modes:
        out[..., int(comp)] += amp * np.sin(wave * x + phase)
    return out


def perturbation_modes(m: TargetManifold, amplitude: float, seed: int):
    """Smooth random perturbation amplitude * sum_c r_c sin(x + theta_c)."""
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(m.ambient_dim)
    r /= np.linalg.norm(r)
    theta = rng.uniform(0, 2 * np.pi, m.ambient_dim)
    return [(c, amplitude * r[c], 1.0, theta[c]) for c in range(m.ambient_dim)]


def make_initial_data(m: TargetManifold, preset: str, params: dict | None = None, seed: int = 0):
    """Return callables (u0, u1) mapping x of shape (N,) to arrays (N, q).

    u0 lies on the target and u1 is tangent at u0. ``params['perturbation']``
    adds a smooth seeded perturbation of that size to u0 before projection.
    """
    params = dict(params or {})
    base = _vec(m, params.get("base"), default_base(m))
    pert = float(params.get("perturbation", 0.0))
    extra = perturbation_modes(m, pert, seed) if pert else []

    if preset == "constant":
        point = _vec(m, params.get("point"), base)

        def raw(x):
            return np.broadcast_to(point, np.shape(x) + (m.ambient_dim,)) + _modes(m, extra, x)

        def vel(x):
            return np.zeros(np.shape(x) + (m.ambient_dim,))

    elif preset == "gaussian_bump":
        amp = _vec(m, params.get("amplitude"))
        velocity = _vec(m, params.get("velocity"))
        center = float(params.get("center", 0.0))
        width = float(params.get("width", 1.0))

        def bump(x):
            return np.exp(-(((np.asarray(x) - center) / width) ** 2))[..., None]

        def raw(x):
            return base + amp * bump(x) + _modes(m, extra, x)

        def vel(x):
            return velocity * bump(x)

    elif preset == "sine_mode":
        u_modes = [tuple(mm) for mm in params.get("u_modes", [])]
        ut_modes = [tuple(mm) for mm in params.get("ut_modes", [])]

        def raw(x):
            return base + _modes(m, u_modes + extra, x)

        def vel(x):
            return _modes(m, ut_modes, x)

    elif preset == "geodesic":
        direction = _vec(m, params.get("direction"))
        speed = float(params.get("speed", 1.0))

        def raw(x):
            return np.broadcast_to(base, np.shape(x) + (m.ambient_dim,)) + _modes(m, extra, x)

        def vel(x):
            p = m.project_point(raw(x))
            w = m.project_tangent(p, np.broadcast_to(direction, p.shape), check=False)
            norm = np.linalg.norm(w, axis=-1, keepdims=True)
            return speed * np.divide(w, norm, out=np.zeros_like(w), where=norm > 0)

    else:
        raise ValueError(f"unknown initial-data preset {preset!r}")

    def u0(x):
        return m.project_point(raw(np.asarray(x, dtype=float)))

    def u1(x):
        x = np.asarray(x, dtype=float)
        return m.project_tangent(u0(x), vel(x), check=False)

    return u0, u1


def geodesic_solution(m: TargetManifold, p, v, t):
    """The x-independent solution with u(0) = p, u_t(0) = v (V = 0, any B)."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if m.kind == "flat":
        return p + t * v
    speed = np.linalg.norm(v, axis=-1, keepdims=True)
    w = speed / m.radius
    safe = np.where(speed > 0, speed, 1.0)
    return np.cos(w * t) * p + np.where(speed > 0, np.sin(w * t) * m.radius / safe, t) * v
