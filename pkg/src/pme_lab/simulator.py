"""Explicit finite-volume integration of the confined porous medium equation.

    d_t rho = div(x rho) + Laplace(rho^m)

in the rescaled variables, where the Barenblatt profile is stationary.  Three
geometries are supported:

* ``line``: N = 1 on [-L, L];
* ``radial``: radially symmetric data in N dimensions on [0, L];
* ``plane``: N = 2 on the square [-L, L]^2, used for the translation mode,
  which has no radial symmetry.

The flux is written as rho v with v = -grad(|x|^2/2 + m/(m-1) rho^(m-1)) and
rho upwinded; this makes the pointwise Barenblatt an exact discrete fixed
point and lets the free boundary advance into empty cells.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .errors import AmplitudeTooLargeError, DomainError, FitError, IntegrationError
from .profile import (
    RadialField,
    barenblatt_cumulative_mass,
    barenblatt_mass,
    barenblatt_of_abs,
)
from .quadrature import sphere_area
from .spectrum import ModeIndex, check_mode, eigenvalue, radial_eigenfunction

L_BOX = 1.5
MAX_STEPS = 20_000_000

TRANSLATION = ModeIndex(1, 0, 1)
DILATION = ModeIndex(0, 1, 1)


@dataclass(frozen=True)
class SimGrid:
    """Uniform finite-volume mesh; ``edges`` are the cell edges along one axis."""

    geometry: str
    edges: np.ndarray
    N: int

    @classmethod
    def line(cls, cells=512, L=L_BOX):
        return cls("line", np.linspace(-L, L, cells + 1), 1)

    @classmethod
    def radial(cls, N, cells=512, L=L_BOX):
        return cls("radial", np.linspace(0.0, L, cells + 1), N)

    @classmethod
    def plane(cls, cells=128, L=L_BOX):
        return cls("plane", np.linspace(-L, L, cells + 1), 2)

    @classmethod
    def for_mode(cls, params, mode, cells=None):
        """Line for N = 1, plane for N = 2 non-radial modes, radial otherwise."""
        if params.N == 1:
            return cls.line(cells or 512)
        if mode.ell == 0:
            return cls.radial(params.N, cells or 512)
        if params.N == 2 and (mode.ell, mode.k) == (1, 0):
            return cls.plane(cells or 128)
        raise DomainError("non-radial modes are only simulated for N = 2 translations")

    @property
    def cells(self):
        return self.edges.size - 1

    @property
    def h(self):
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def shape(self):
        return (self.cells, self.cells) if self.geometry == "plane" else (self.cells,)

    @property
    def volumes(self):
        """Cell measure, including the sphere factor for radial meshes."""
        e = self.edges
        if self.geometry == "radial":
            return sphere_area(self.N) * (e[1:] ** self.N - e[:-1] ** self.N) / self.N
        if self.geometry == "plane":
            return np.full(self.shape, self.h**2)
        return np.diff(e)

    @property
    def areas(self):
        e = self.edges
        if self.geometry == "radial":
            a = sphere_area(self.N) * e ** (self.N - 1)
        else:
            a = np.ones_like(e)
        a = a.copy()
        a[0] = a[-1] = 0.0
        return a


@dataclass
class SimState:
    """Cell averages ``rho`` at rescaled time ``t_hat`` on ``grid``."""

    grid: SimGrid
    rho: np.ndarray
    t_hat: float = 0.0
    dt: float = 0.0
    mass0: float = None
    steps: int = 0
    clipped: float = 0.0

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.shape != self.grid.shape:
            raise DomainError("density shape does not match the grid")
        if np.any(self.rho < 0):
            raise DomainError("density must be non-negative")
        if self.mass0 is None:
            self.mass0 = self.mass

    @property
    def cells(self):
        return self.grid.edges

    @property
    def mass(self):
        return float(np.sum(self.rho * self.grid.volumes))

    @property
    def boundary_mass(self):
        """Mass in the outermost cells, which must stay negligible."""
        v = self.grid.volumes
        if self.grid.geometry == "plane":
            ring = np.ones(self.grid.shape, dtype=bool)
            ring[1:-1, 1:-1] = False
            return float(np.sum((self.rho * v)[ring]))
        if self.grid.geometry == "radial":
            return float(self.rho[-1] * v[-1])
        return float(self.rho[0] * v[0] + self.rho[-1] * v[-1])


def _line_cumulative(params, x):
    """Mass of the profile on (-inf, x] for N = 1."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * barenblatt_cumulative_mass(params, np.abs(x))
    return 0.5 * barenblatt_mass(params) + np.sign(x) * half


def _plane_cell_averages(fn, grid, cut_radius, center, sub=16):
    """Cell averages of ``fn(x, y)`` over the square mesh.

    Cells crossed by the circle |x - center| = cut_radius are subdivided.
    """
    e = grid.edges
    h = grid.h
    g, w = np.polynomial.legendre.leggauss(4)
    g, w = 0.5 * (g + 1.0), 0.5 * w
    # smooth cells: 4x4 Gauss-Legendre
    px = (e[:-1, None] + h * g[None, :]).ravel()
    X, Y = np.meshgrid(px, px, indexing="ij")
    vals = fn(X, Y).reshape(grid.cells, 4, grid.cells, 4)
    avg = np.einsum("iajb,a,b->ij", vals, w, w)
    # cells cut by the support edge
    lo = e[:-1]
    cx = lo[:, None] + 0.0 * lo[None, :]
    cy = lo[None, :] + 0.0 * lo[:, None]
    near = lambda a, b: np.hypot(a - center[0], b - center[1])
    corners = np.stack([near(cx + dx, cy + dy) for dx in (0, h) for dy in (0, h)])
    cut = (corners.min(axis=0) < cut_radius) & (corners.max(axis=0) > cut_radius)
    fine = (np.arange(sub)[:, None] + g[None, :]).ravel() / sub
    fw = np.tile(w, sub) / sub
    for i, j in zip(*np.nonzero(cut)):
        FX, FY = np.meshgrid(lo[i] + h * fine, lo[j] + h * fine, indexing="ij")
        avg[i, j] = fw @ fn(FX, FY) @ fw
    return avg


def barenblatt_cells(params, grid, shift=0.0):
    """Exact cell averages of the profile (translated by ``shift`` along x_1)."""
    e = grid.edges
    if grid.geometry == "line":
        return np.diff(_line_cumulative(params, e - shift)) / np.diff(e)
    if grid.geometry == "radial":
        if shift:
            raise DomainError("radial meshes hold centered profiles only")
        return np.diff(barenblatt_cumulative_mass(params, e)) / grid.volumes
    avg = _plane_cell_averages(
        lambda x, y: barenblatt_of_abs(params, np.hypot(x - shift, y)), grid, 1.0, (shift, 0.0)
    )
    # quadrature error only; restore the exact mass
    return avg * barenblatt_mass(params) / np.sum(avg * grid.volumes)


def displacement_potential(params, mode):
    """Eigenfunction psi of ``mode`` scaled so that max |grad psi| = 1 on the unit ball.

    Returned as a polynomial in the signed coordinate (N = 1), in r (radial
    modes) or in x_1 (the N = 2 translation).
    """
    check_mode(params, mode.ell, mode.k)
    f = radial_eigenfunction(params, mode.ell, mode.k)
    probe = np.linspace(-1.0 if params.N == 1 else 0.0, 1.0, 4001)
    scale = np.max(np.abs(f.deriv()(probe)))
    return f / scale


def _check_monotone(psi, s, line):
    r = np.linspace(-1.0 if line else 0.0, 1.0, 4001)
    d1, d2 = psi.deriv(1), psi.deriv(2)
    if np.any(1.0 + s * d2(r) <= 0.0):
        raise AmplitudeTooLargeError(f"1 + s psi'' changes sign for s = {s}")
    if not line:
        rr = r[r > 0]
        if np.any(1.0 + s * d1(rr) / rr <= 0.0) or 1.0 + s * d2(0.0) <= 0.0:
            raise AmplitudeTooLargeError(f"1 + s psi'/r changes sign for s = {s}")


def _inverse_map(T, lo, hi, y):
    """Preimages under the increasing map T of the points y, clipped to [lo, hi]."""
    out = np.empty_like(y)
    tlo, thi = T(lo), T(hi)
    for i, yi in enumerate(y):
        if yi <= tlo:
            out[i] = lo
        elif yi >= thi:
            out[i] = hi
        else:
            out[i] = brentq(lambda x: T(x) - yi, lo, hi, xtol=1e-15, rtol=1e-15)
    return out


def pushforward_init(params, mode, s, grid=None):
    """Displacement-perturbed profile: rho_* pushed forward by x -> x + s grad psi.

    Cell averages are exact masses of preimages, M_*(T^-1(edge)), so the total
    mass equals that of the profile.  On the plane the translation is sampled
    by quadrature and renormalized to the exact mass.
    """
    if not math.isfinite(s):
        raise DomainError("amplitude must be finite")
    grid = grid or SimGrid.for_mode(params, mode)
    N = params.N
    if grid.N != N:
        raise DomainError("grid dimension does not match the parameters")
    if N >= 2 and mode.ell != 0 and grid.geometry != "plane":
        raise DomainError("radial simulations admit only ell = 0 modes for N >= 2")
    if grid.geometry == "plane":
        if (mode.ell, mode.k) != (1, 0):
            raise DomainError("the plane geometry is restricted to the translation mode")
        if abs(s) >= L_BOX - 1.0:
            raise AmplitudeTooLargeError("translated support leaves the box")
        rho = barenblatt_cells(params, grid, shift=s)
        return SimState(grid, rho, mass0=barenblatt_mass(params))
    psi = displacement_potential(params, mode)
    line = grid.geometry == "line"
    _check_monotone(psi, s, line)
    d1 = psi.deriv()

    def T(x):
        return x + s * d1(x)

    e = grid.edges
    if line:
        pre = _inverse_map(T, -1.0, 1.0, e)
        masses = np.diff(_line_cumulative(params, pre))
    else:
        pre = _inverse_map(T, 0.0, 1.0, e)
        masses = np.diff(barenblatt_cumulative_mass(params, pre))
    if max(abs(T(-1.0 if line else 0.0)), abs(T(1.0))) >= e[-1]:
        raise AmplitudeTooLargeError("perturbed support leaves the box")
    rho = masses / grid.volumes
    return SimState(grid, rho, mass0=barenblatt_mass(params))


def _advance(params, state, t_end, max_steps):
    g = state.grid
    rho = state.rho.copy()
    m = float(params.m)
    if g.geometry == "plane":
        c = g.centers
        t, steps, dt, clipped = _kernels.advance_2d(rho, c, g.h, m, float(np.max(np.abs(c))), state.t_hat, t_end, max_steps)
    else:
        c = g.centers
        t, steps, dt, clipped = _kernels.advance_1d(
            rho, c, g.areas, g.volumes, m, float(g.N), g.h, float(np.max(np.abs(c))), state.t_hat, t_end, max_steps
        )
    if not np.all(np.isfinite(rho)):
        raise IntegrationError(f"non-finite density near t_hat = {t:.6g}", last_state=state)
    return replace(state, rho=rho, t_hat=float(t), dt=float(dt), steps=state.steps + int(steps), clipped=state.clipped + clipped)


def step(params, state):
    """One explicit step with the adaptive stable time step."""
    return _advance(params, state, math.inf, 1)


def weighted_l2_weight(params, reference, cutoff=1e-3):
    """max(rho_*, cutoff rho_*(0))^(2-m), the density weight of the L2 distance."""
    floor = cutoff * params.center_value
    return np.maximum(reference, floor) ** (2.0 - params.m)


def _w2_from_masses(edges, m1, m0):
    """Quadratic transport cost between two cell-mass vectors on common edges.

    Densities are constant per cell, so quantile functions are piecewise
    linear in the mass variable; the squared difference is integrated exactly
    on the merged breakpoints.  Returns the cost divided by the total mass.
    """
    c1 = np.concatenate([[0.0], np.cumsum(m1)])
    c0 = np.concatenate([[0.0], np.cumsum(m0)])
    total = 0.5 * (c1[-1] + c0[-1])
    c1 *= total / c1[-1]
    c0 *= total / c0[-1]
    q = np.union1d(c1, c0)
    lo, hi = q[:-1], q[1:]
    mid = 0.5 * (lo + hi)

    def quantile(c, masses):
        # each merged interval lies inside one occupied cell; invert its linear CDF there
        i = np.clip(np.searchsorted(c[1:], mid), 0, masses.size - 1)
        width = (edges[i + 1] - edges[i]) / np.where(masses[i] > 0, c[i + 1] - c[i], 1.0)
        return edges[i] + (lo - c[i]) * width, edges[i] + (hi - c[i]) * width

    a1, b1 = quantile(c1, m1)
    a0, b0 = quantile(c0, m0)
    d_lo, d_hi = a1 - a0, b1 - b0
    dq = np.diff(q)
    cost = np.sum(dq * (d_lo**2 + d_lo * d_hi + d_hi**2) / 3.0)
    return math.sqrt(max(cost, 0.0) / total)


def distances(params, state, reference):
    """L1, weighted L2 and (line/radial) Wasserstein distances to ``reference`` cell averages."""
    v = state.grid.volumes
    diff = state.rho - reference
    out = {
        "d_L1": float(np.sum(np.abs(diff) * v)),
        "d_weightedL2": float(math.sqrt(np.sum(weighted_l2_weight(params, reference) * diff**2 * v))),
        "d_W2": None,
    }
    if state.grid.geometry != "plane":
        out["d_W2"] = _w2_from_masses(state.grid.edges, state.rho * v, reference * v)
    return out


@dataclass
class RunResult:
    records: list
    state: SimState
    mass_drift: float
    boundary_mass: float

    def series(self, metric="d_L1"):
        return [(r["t_hat"], r[metric]) for r in self.records]


def run(params, state0, t_max, observe_every, reference=None):
    """Integrate to ``t_max`` and record distances to the profile every ``observe_every``.

    ``reference`` defaults to the exact cell averages of the Barenblatt profile.
    Time steps are shortened to land exactly on observation times.
    """
    if not t_max > 0 or not observe_every > 0:
        raise DomainError("t_max and observe_every must be positive")
    if reference is None:
        reference = barenblatt_cells(params, state0.grid)
    times = np.arange(1, int(math.floor(t_max / observe_every + 1e-9)) + 1) * observe_every
    if times.size == 0 or times[-1] < t_max - 1e-12:
        times = np.append(times, t_max)
    state = state0
    records = [{"t_hat": state.t_hat, **distances(params, state, reference)}]
    boundary = state.boundary_mass
    for t in state0.t_hat + times:
        state = _advance(params, state, float(t), MAX_STEPS)
        boundary = max(boundary, state.boundary_mass)
        records.append({"t_hat": state.t_hat, **distances(params, state, reference)})
    drift = abs(state.mass - state0.mass) / state0.mass
    return RunResult(records, state, drift, boundary)


@dataclass
class DecayFit:
    """Log-linear fit d(t) ~ exp(-rate t) over ``window``."""

    times: np.ndarray
    distances: np.ndarray
    rate: float
    r_squared: float
    window: tuple
    flag: Optional[str] = None

    def as_record(self):
        return {
            "rate": self.rate,
            "r_squared": self.r_squared,
            "window_start": self.window[0],
            "window_end": self.window[1],
            "points": int(len(self.times)),
            "flag": self.flag,
        }


def fit_decay_rate(series, window=None, floor=None, min_points=5):
    """Least-squares slope of log d against t; rate = -slope.

    ``window`` defaults to skipping the first 20% of the time span.  Points
    with d <= 10 * ``floor`` (the drift level of an unperturbed run) are
    excluded.  A series with no variation returns rate 0, r^2 = 0 and the flag
    ``"no decay (stationary)"``.
    """
    data = np.asarray([(t, d) for t, d in series], dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise FitError("empty series")
    t, d = data[:, 0], data[:, 1]
    if window is None:
        window = (t[0] + 0.2 * (t[-1] - t[0]), t[-1])
    sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    if floor is not None:
        sel &= d > 10.0 * floor
    t, d = t[sel], d[sel]
    if t.size < min_points:
        raise FitError(f"only {t.size} usable points in the fit window (need {min_points})")
    if np.any(d <= 0):
        if np.all(d == 0):
            return DecayFit(t, d, 0.0, 0.0, tuple(window), "no decay (stationary)")
        raise FitError("distances must be positive in the fit window")
    y = np.log(d)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot <= 1e-24 * max(1.0, float(np.sum(y**2))):
        return DecayFit(t, d, 0.0, 0.0, tuple(window), "no decay (stationary)")
    r2 = min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return DecayFit(t, d, float(-slope), r2, tuple(window))


def wasserstein_1d(rho1, rho0):
    """Quadratic Wasserstein distance between two densities sampled on a common axis.

    Each grid interval carries the trapezoidal mass of its end values,
    spread uniformly; the monotone coupling is then integrated exactly.
    Distances are between the normalized measures.
    """
    if not np.array_equal(rho1.grid, rho0.grid):
        raise DomainError("fields must share the same grid")
    if rho1.kind != "density" or rho0.kind != "density":
        raise DomainError("Wasserstein distance needs densities")
    g = rho1.grid
    h = np.diff(g)
    m1 = 0.5 * h * (rho1.values[1:] + rho1.values[:-1])
    m0 = 0.5 * h * (rho0.values[1:] + rho0.values[:-1])
    M1, M0 = m1.sum(), m0.sum()
    if M0 <= 0 or M1 <= 0:
        raise DomainError("densities must have positive mass")
    if abs(M1 - M0) > 1e-8 * M0:
        raise DomainError(f"masses differ: {M1!r} vs {M0!r}")
    return _w2_from_masses(g, m1, m0)


def mode_by_name(name):
    """'translation', 'dilation' or 'lk:L,K'."""
    if name == "translation":
        return TRANSLATION
    if name == "dilation":
        return DILATION
    if name.startswith("lk:"):
        try:
            ell, k = (int(v) for v in name[3:].split(","))
        except ValueError as exc:
            raise DomainError(f"malformed mode {name!r}; expected lk:L,K") from exc
        return ModeIndex(ell, k, 1)
    raise DomainError(f"unknown mode {name!r}")


@dataclass
class DecayExperiment:
    fit: DecayFit
    predicted: float
    perturbed: RunResult
    stationary: RunResult
    metric: str
    floor: float = field(default=0.0)

    @property
    def relative_error(self):
        return abs(self.fit.rate - self.predicted) / self.predicted


def decay_experiment(params, mode, s, t_max, cells=None, observe_every=0.05, metric="d_L1", workers=1):
    """Run the perturbed and the unperturbed problem and fit the decay rate.

    The unperturbed run calibrates the distance floor of the scheme; the fit
    excludes points within 10x of its largest value.  If the perturbed run
    never rises above that band (s = 0 in particular) the fit is flagged
    ``"no decay (stationary)"``.  With ``workers > 1`` the two runs execute
    concurrently (the compiled kernels release the GIL).
    """
    grid = SimGrid.for_mode(params, mode, cells)
    reference = barenblatt_cells(params, grid)
    start = pushforward_init(params, mode, s, grid)

    def base_run():
        return run(params, SimState(grid, reference.copy()), t_max, observe_every, reference)

    def pert_run():
        return run(params, start, t_max, observe_every, reference)

    if s == 0:
        base = pert = base_run()
    elif workers > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fb, fp = pool.submit(base_run), pool.submit(pert_run)
            base, pert = fb.result(), fp.result()
    else:
        base, pert = base_run(), pert_run()
    floor = max(r[metric] for r in base.records)
    series = pert.series(metric)
    t = np.array([p[0] for p in series])
    d = np.array([p[1] for p in series])
    if s == 0 or np.all(d <= 10.0 * floor):
        fit = DecayFit(t, d, 0.0, 0.0, (float(t[0]), float(t[-1])), "no decay (stationary)")
    else:
        fit = fit_decay_rate(series, floor=floor)
    return DecayExperiment(fit, eigenvalue(params, mode.ell, mode.k), pert, base, metric, floor)
