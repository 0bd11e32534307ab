"""Barenblatt profiles, self-similar rescaling, entropy and dissipation.

Everything here lives in the confined (rescaled) variables unless a function
name says otherwise: the stationary profile is supported on the unit ball and
its pressure satisfies ``2m/(m-1) * rho^(m-1) = (1 - r^2)_+``.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import beta as beta_fn
from scipy.special import betainc

from .errors import DomainError
from .quadrature import gauss_legendre, sphere_area


@dataclass(frozen=True)
class Parameters:
    """Exponent ``m > 1`` and dimension ``N >= 1``; ``mass`` is optional metadata."""

    m: float
    N: int
    mass: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.m) and self.m > 1.0):
            raise DomainError(f"m must be > 1, got {self.m}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if self.mass is not None and not self.mass > 0.0:
            raise DomainError("mass must be positive")

    @property
    def alpha(self):
        return 1.0 / (self.N * (self.m - 1.0) + 2.0)

    @property
    def profile_exponent(self):
        """1/(m-1): the power of (1 - r^2) in the profile."""
        return 1.0 / (self.m - 1.0)

    @property
    def center_value(self):
        """rho_*(0) = ((m-1)/(2m))^(1/(m-1))."""
        return ((self.m - 1.0) / (2.0 * self.m)) ** self.profile_exponent


def barenblatt_density(params, r):
    """Stationary profile [(m-1)/(2m) (1 - r^2)_+]^(1/(m-1))."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("radius must be non-negative")
    return barenblatt_of_abs(params, r)


def barenblatt_of_abs(params, r):
    # no sign check: callers pass |x| or signed 1D coordinates deliberately
    r = np.asarray(r, dtype=float)
    pressure = (params.m - 1.0) / (2.0 * params.m) * np.maximum(1.0 - r * r, 0.0)
    return (pressure ** params.profile_exponent)[()]


def barenblatt_mass(params):
    """Total mass of the profile over R^N."""
    b = params.profile_exponent
    radial = 0.5 * beta_fn(params.N / 2.0, b + 1.0)
    return sphere_area(params.N) * params.center_value * radial


def barenblatt_cumulative_mass(params, r):
    """Mass of the profile inside the ball of radius r (clipped to [0, 1])."""
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    frac = betainc(params.N / 2.0, params.profile_exponent + 1.0, r * r)
    return (barenblatt_mass(params) * frac)[()]


def _norm(params, x):
    x = np.asarray(x, dtype=float)
    if params.N == 1:
        return np.abs(x)
    if x.shape[-1] != params.N:
        raise DomainError(f"points must have trailing dimension {params.N}")
    return np.linalg.norm(x, axis=-1)


def selfsimilar_density(params, L, t, x):
    """Barenblatt solution of the original equation at time t > 0.

    ``x`` is a scalar/array of coordinates for N = 1 and an array with trailing
    axis of length N otherwise.
    """
    if t <= 0:
        raise DomainError("time must be positive")
    if L <= 0:
        raise DomainError("L must be positive")
    a, m, N = params.alpha, params.m, params.N
    r2 = _norm(params, x) ** 2
    core = np.maximum(L - a * (m - 1.0) / (2.0 * m) * r2 / t ** (2.0 * a), 0.0)
    return (t ** (-N * a) * core ** params.profile_exponent)[()]


def _beta_scale(params, L):
    return math.sqrt(2.0 * params.m * L / (params.alpha * (params.m - 1.0)))


def rescale(params, L, t, x, rho):
    """Map (t, x, rho) to confined variables (t_hat, x_hat, rho_hat)."""
    if t <= 0:
        raise DomainError("time must be positive")
    a = params.alpha
    beta = _beta_scale(params, L)
    t_hat = a * math.log(t)
    x_hat = np.asarray(x, dtype=float) / (beta * t**a)
    rho_hat = np.asarray(rho, dtype=float) * t ** (a * params.N) / (a * beta**2) ** params.profile_exponent
    return t_hat, x_hat[()], rho_hat[()]


def unrescale(params, L, t_hat, x_hat, rho_hat):
    """Inverse of :func:`rescale`."""
    a = params.alpha
    beta = _beta_scale(params, L)
    t = math.exp(t_hat / a)
    x = beta * t**a * np.asarray(x_hat, dtype=float)
    rho = (a * beta**2) ** params.profile_exponent * t ** (-a * params.N) * np.asarray(rho_hat, dtype=float)
    return t, x[()], rho[()]


@dataclass
class RadialField:
    """Samples of a radial function.

    ``kind`` is ``"density"`` (values must be non-negative) or ``"potential"``.
    For N = 1 the grid may extend to negative coordinates, in which case it is
    read as a field on the line rather than a radial profile.  ``source`` is an
    optional exact evaluator (for instance a polynomial) that consumers prefer
    over interpolating the samples; it is not serialized.
    """

    grid: np.ndarray
    values: np.ndarray
    kind: str = "density"
    source: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in ("density", "potential"):
            raise DomainError(f"unknown field kind {self.kind!r}")
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise DomainError("grid and values must be 1-D arrays of equal length")
        if self.grid.size < 2 or np.any(np.diff(self.grid) <= 0):
            raise DomainError("grid must be strictly increasing")
        if self.kind == "density" and np.any(self.values < 0):
            raise DomainError("density values must be non-negative")

    @classmethod
    def from_function(cls, grid, fn, kind="density"):
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.asarray(fn(grid), dtype=float), kind, source=fn)

    def at(self, r):
        """Evaluate at arbitrary points: exact source if present, else a cubic spline."""
        if self.source is not None:
            return np.asarray(self.source(np.asarray(r, dtype=float)), dtype=float)
        return CubicSpline(self.grid, self.values)(r)

    @property
    def on_line(self):
        return self.grid[0] < 0.0

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["r", "value"])
        for r, v in zip(self.grid, self.values):
            writer.writerow([repr(float(r)), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, kind="density"):
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != ["r", "value"]:
            raise DomainError("expected header r,value")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        return cls(data[:, 0], data[:, 1], kind)

    def to_json(self):
        return json.dumps(
            {"grid": self.grid.tolist(), "values": self.values.tolist(), "kind": self.kind}
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(np.array(d["grid"]), np.array(d["values"]), d["kind"])


def barenblatt_field(params, grid):
    """Barenblatt profile sampled on ``grid`` with the exact profile attached."""
    return RadialField.from_function(grid, lambda r: barenblatt_of_abs(params, r), "density")


def _measure(params, field_):
    """(constant factor, Jacobian power) of the integration measure."""
    if params.N == 1 and field_.on_line:
        return 1.0, 0
    if field_.grid[0] < 0:
        raise DomainError("radial grids must start at r >= 0")
    return sphere_area(params.N), params.N - 1


def _density_evaluator(params, rho):
    if rho.source is not None:
        return lambda r: np.maximum(np.asarray(rho.source(r), dtype=float), 0.0)
    # the pressure rho^(m-1) is Lipschitz across the free boundary; spline it instead of rho
    pressure = CubicSpline(rho.grid, rho.values ** (params.m - 1.0))
    return lambda r: np.maximum(pressure(r), 0.0) ** params.profile_exponent


def _composite_nodes(params, rho, order=8, grade_levels=10):
    """Gauss nodes on each grid interval, geometrically refined at support edges."""
    g = rho.grid
    positive = rho.values > 0
    change = positive[:-1] != positive[1:]
    edge = change.copy()
    edge[1:] |= change[:-1]
    edge[:-1] |= change[1:]
    nodes, weights = [], []
    for i in range(g.size - 1):
        a, b = g[i], g[i + 1]
        if edge[i]:
            # graded split towards both ends of the interval
            t = 0.5 ** np.arange(grade_levels, 0, -1)
            cuts = np.unique(np.concatenate([[0.0], t * 0.5, 1.0 - t * 0.5, [0.5, 1.0]]))
            breaks = a + (b - a) * cuts
        else:
            breaks = np.array([a, b])
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            x, w = gauss_legendre(lo, hi, order)
            nodes.append(x)
            weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def _check_density(rho):
    if rho.kind != "density":
        raise DomainError("expected a density field")
    if np.any(rho.values < 0):
        raise DomainError("density has negative values")


def entropy(params, rho):
    """(1/(m-1)) int rho^m dx + (1/2) int |x|^2 rho dx over R^N."""
    _check_density(rho)
    if not np.any(rho.values > 0) and rho.source is None:
        return 0.0
    factor, power = _measure(params, rho)
    x, w = _composite_nodes(params, rho)
    d = _density_evaluator(params, rho)(x)
    integrand = d**params.m / (params.m - 1.0) + 0.5 * x * x * d
    return float(factor * np.sum(w * integrand * np.abs(x) ** power))


def _one_sided_gradient(x, f, inside):
    """Centered differences, switched to one-sided next to the support edge."""
    grad = np.gradient(f, x, edge_order=2)
    n = x.size
    for i in range(n):
        if not inside[i]:
            continue
        left_ok = i > 0 and inside[i - 1]
        right_ok = i < n - 1 and inside[i + 1]
        if left_ok and right_ok:
            continue
        if right_ok and i + 2 < n and inside[i + 2]:
            h1, h2 = x[i + 1] - x[i], x[i + 2] - x[i]
            grad[i] = (f[i + 1] * h2**2 - f[i + 2] * h1**2 - f[i] * (h2**2 - h1**2)) / (h1 * h2 * (h2 - h1))
        elif left_ok and i - 2 >= 0 and inside[i - 2]:
            h1, h2 = x[i] - x[i - 1], x[i] - x[i - 2]
            grad[i] = -(f[i - 1] * h2**2 - f[i - 2] * h1**2 - f[i] * (h2**2 - h1**2)) / (h1 * h2 * (h2 - h1))
        elif right_ok:
            grad[i] = (f[i + 1] - f[i]) / (x[i + 1] - x[i])
        elif left_ok:
            grad[i] = (f[i] - f[i - 1]) / (x[i] - x[i - 1])
    return grad


def dissipation(params, rho):
    """Entropy dissipation int rho |grad(|x|^2/2 + m/(m-1) rho^(m-1))|^2 dx >= 0.

    The chemical potential is differentiated with centered differences on the
    sample grid (one-sided at support edges); the integrand is then integrated
    with its interpolating cubic spline.
    """
    _check_density(rho)
    factor, power = _measure(params, rho)
    x, v = rho.grid, rho.values
    potential = 0.5 * x * x + params.m / (params.m - 1.0) * v ** (params.m - 1.0)
    grad = _one_sided_gradient(x, potential, v > 0)
    integrand = v * grad**2 * np.abs(x) ** power
    total = CubicSpline(x, integrand).integrate(x[0], x[-1])
    return float(max(factor * total, 0.0))
