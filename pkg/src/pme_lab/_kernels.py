"""Compiled explicit finite-volume kernels for the confined porous medium equation.

Fluxes follow the gradient-flow form rho * v with velocity
v = -grad(|x|^2/2 + m/(m-1) rho^(m-1)); rho is upwinded by the sign of v on
each interface.  A cell whose density is zero contributes no outflow, so the
free boundary moves only through inflow from occupied neighbours.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def advance_1d(rho, xc, areas, vols, m, dim, hmin, xmax, t, t_end, max_steps):
    """Advance cell averages ``rho`` in place from ``t`` to ``t_end``.

    ``areas`` has one entry per cell edge (zero-flux ends), ``vols`` one per
    cell.  Returns (t, steps, last_dt, clipped_mass).
    """
    n = rho.size
    flux = np.zeros(n + 1)
    xi = np.empty(n)
    c = m / (m - 1.0)
    steps = 0
    clipped = 0.0
    dt = 0.0
    while t < t_end and steps < max_steps:
        rmax = 0.0
        for i in range(n):
            if rho[i] > rmax:
                rmax = rho[i]
            xi[i] = 0.5 * xc[i] * xc[i] + c * rho[i] ** (m - 1.0)
        for j in range(1, n):
            v = -(xi[j] - xi[j - 1]) / (xc[j] - xc[j - 1])
            flux[j] = v * rho[j - 1] if v > 0.0 else v * rho[j]
        # stability bound of the explicit scheme, recomputed every step
        diff = 2.0 * dim * m * rmax ** (m - 1.0)
        dt = hmin / (dim * xmax)
        if diff > 0.0 and hmin * hmin / diff < dt:
            dt = hmin * hmin / diff
        dt *= 0.4
        # positivity: outflow of a cell must not exceed its content
        rate = 0.0
        for i in range(n):
            if rho[i] > 0.0:
                out = 0.0
                if flux[i + 1] > 0.0:
                    out += flux[i + 1] * areas[i + 1]
                if flux[i] < 0.0:
                    out -= flux[i] * areas[i]
                out /= vols[i] * rho[i]
                if out > rate:
                    rate = out
        if rate > 0.0 and 0.5 / rate < dt:
            dt = 0.5 / rate
        if t + dt >= t_end:
            dt = t_end - t
        for i in range(n):
            rho[i] -= dt * (areas[i + 1] * flux[i + 1] - areas[i] * flux[i]) / vols[i]
        neg = 0.0
        for i in range(n):
            if rho[i] < 0.0:
                neg -= rho[i] * vols[i]
                rho[i] = 0.0
        if neg > 0.0:
            total = 0.0
            for i in range(n):
                total += rho[i] * vols[i]
            scale = (total - neg) / total
            for i in range(n):
                rho[i] *= scale
            clipped += neg
        t = t_end if t + dt >= t_end else t + dt
        steps += 1
        if not np.isfinite(np.sum(rho)):
            break
    return t, steps, dt, clipped


@njit(cache=True, nogil=True)
def advance_2d(rho, xc, h, m, xmax, t, t_end, max_steps):
    """Two-dimensional Cartesian analogue of :func:`advance_1d` on a square mesh."""
    n = rho.shape[0]
    fx = np.zeros((n + 1, n))
    fy = np.zeros((n, n + 1))
    xi = np.empty((n, n))
    c = m / (m - 1.0)
    steps = 0
    clipped = 0.0
    dt = 0.0
    cell = h * h
    while t < t_end and steps < max_steps:
        rmax = 0.0
        for i in range(n):
            for j in range(n):
                if rho[i, j] > rmax:
                    rmax = rho[i, j]
                xi[i, j] = 0.5 * (xc[i] * xc[i] + xc[j] * xc[j]) + c * rho[i, j] ** (m - 1.0)
        for i in range(1, n):
            for j in range(n):
                v = -(xi[i, j] - xi[i - 1, j]) / h
                fx[i, j] = v * rho[i - 1, j] if v > 0.0 else v * rho[i, j]
        for i in range(n):
            for j in range(1, n):
                v = -(xi[i, j] - xi[i, j - 1]) / h
                fy[i, j] = v * rho[i, j - 1] if v > 0.0 else v * rho[i, j]
        diff = 4.0 * m * rmax ** (m - 1.0)
        dt = h / (2.0 * xmax)
        if diff > 0.0 and h * h / diff < dt:
            dt = h * h / diff
        dt *= 0.4
        rate = 0.0
        for i in range(n):
            for j in range(n):
                if rho[i, j] > 0.0:
                    out = max(fx[i + 1, j], 0.0) - min(fx[i, j], 0.0) + max(fy[i, j + 1], 0.0) - min(fy[i, j], 0.0)
                    out /= h * rho[i, j]
                    if out > rate:
                        rate = out
        if rate > 0.0 and 0.5 / rate < dt:
            dt = 0.5 / rate
        if t + dt >= t_end:
            dt = t_end - t
        neg = 0.0
        for i in range(n):
            for j in range(n):
                rho[i, j] -= dt * (fx[i + 1, j] - fx[i, j] + fy[i, j + 1] - fy[i, j]) / h
                if rho[i, j] < 0.0:
                    neg -= rho[i, j] * cell
                    rho[i, j] = 0.0
        if neg > 0.0:
            total = 0.0
            for i in range(n):
                for j in range(n):
                    total += rho[i, j] * cell
            scale = (total - neg) / total
            for i in range(n):
                for j in range(n):
                    rho[i, j] *= scale
            clipped += neg
        t = t_end if t + dt >= t_end else t + dt
        steps += 1
        if not np.isfinite(np.sum(rho)):
            break
    return t, steps, dt, clipped
