"""Second-order finite-difference stencils and trapezoidal quadrature on a 1D grid.

Arrays carry the grid along axis 0; trailing axes are components.
"""
import numpy as np


def d_dx(f, dx, periodic=True):
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * dx)
    if periodic:
        out[0] = (f[1] - f[-1]) / (2 * dx)
        out[-1] = (f[0] - f[-2]) / (2 * dx)
        return out
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dx)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dx)
    return out


def d2_dx2(f, dx, periodic=True):
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / dx**2
    if periodic:
        out[0] = (f[1] - 2 * f[0] + f[-1]) / dx**2
        out[-1] = (f[0] - 2 * f[-1] + f[-2]) / dx**2
        return out
    out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / dx**2
    out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / dx**2
    return out


def quad_weights(n, dx, periodic=True):
    w = np.full(n, dx)
    if not periodic:
        w[0] = w[-1] = dx / 2
    return w


def integrate(f, dx, periodic=True):
    f = np.asarray(f, dtype=float)
    return float(quad_weights(f.shape[0], dx, periodic) @ f)


def l2_norm(f, dx, periodic=True):
    f = np.asarray(f, dtype=float)
    sq = f * f
    if sq.ndim > 1:
        sq = sq.reshape(sq.shape[0], -1).sum(axis=1)
    return float(np.sqrt(max(integrate(sq, dx, periodic), 0.0)))


def sq_norm(v):
    """Pointwise squared Euclidean norm over the last axis."""
    return np.sum(np.asarray(v) ** 2, axis=-1)
