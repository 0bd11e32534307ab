"""Closed-form spectrum of the displacement Hessian around the Barenblatt profile.

Modes are indexed by (ell, k, n): ``ell`` is the spherical-harmonic degree,
``k`` the radial index and ``n`` enumerates the harmonics of degree ``ell``.
Eigenfunctions are polynomials of degree ell + 2k, normalized so that the
hypergeometric factor equals 1 at the origin.

Enumeration of ``n`` (the eigenspaces carry no canonical order):

* N = 1: a single harmonic, Y(+-1) = (+-1)^ell.
* N = 2: n = 1 -> cos(ell theta)/sqrt(pi), n = 2 -> sin(ell theta)/sqrt(pi);
  for ell = 0 the constant 1/sqrt(2 pi).
* N = 3: n = 1..2ell+1 maps to the real-harmonic order M = n - ell - 1 in
  -ell..ell (sin-type for M < 0, cos-type for M > 0).
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import lpmv

from .errors import DomainError, UnsupportedDimensionError
from .hypergeo import hyp_poly_coefficients
from .profile import Parameters, barenblatt_of_abs

_INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class ModeIndex:
    ell: int
    k: int
    n: int = 1


@dataclass(frozen=True)
class SpectrumEntry:
    ell: int
    k: int
    lam: float
    multiplicity: int
    degree: int

    def as_record(self):
        return {
            "ell": self.ell,
            "k": self.k,
            "lambda": self.lam,
            "multiplicity": self.multiplicity,
            "degree": self.degree,
        }


def check_mode(params, ell, k, allow_ground=False):
    if int(ell) != ell or int(k) != k or ell < 0 or k < 0:
        raise DomainError("ell and k must be non-negative integers")
    if not allow_ground and ell == 0 and k == 0:
        raise DomainError("(ell, k) = (0, 0) is not an eigenmode (constants are quotiented out)")
    if params.N == 1 and ell > 1:
        raise DomainError("for N = 1 only ell in {0, 1} (parity) is admissible")


def spherical_eigenvalue(N, ell):
    """Eigenvalue ell(ell + N - 2) of minus the Laplace-Beltrami operator."""
    return ell * (ell + N - 2)


def eigenvalue(params, ell, k):
    """lambda_{ell k} = ell + 2k + 2k(k + ell + N/2 - 1)(m - 1)."""
    check_mode(params, ell, k)
    return ell + 2 * k + 2 * k * (k + ell + params.N / 2 - 1) * (params.m - 1)


def multiplicity(params, ell):
    """Dimension N_ell of the space of degree-ell spherical harmonics."""
    N = params.N
    if int(ell) != ell or ell < 0:
        raise DomainError("ell must be a non-negative integer")
    if N == 1:
        if ell > 1:
            raise DomainError("for N = 1 only ell in {0, 1} is admissible")
        return 1
    if ell == 0:
        return 1
    value = math.factorial(N + ell - 3) * (N + 2 * ell - 2) // (math.factorial(ell) * math.factorial(N - 2))
    if value > _INT64_MAX:
        raise OverflowError(f"multiplicity for N={N}, ell={ell} exceeds the 64-bit range")
    return value


def hypergeometric_parameters(params, ell, k):
    """(b, c) of the eigenfunction factor F(-k, b; c; r^2)."""
    b = 1.0 / (params.m - 1.0) + ell + params.N / 2.0 - 1.0 + k
    c = ell + params.N / 2.0
    return b, c


def radial_eigenfunction(params, ell, k):
    """f_{ell k}(r) = r^ell F(-k, b; c; r^2) as a :class:`numpy.polynomial.Polynomial`."""
    check_mode(params, ell, k, allow_ground=True)
    b, c = hypergeometric_parameters(params, ell, k)
    z_coef = hyp_poly_coefficients(k, b, c)
    coef = np.zeros(ell + 2 * k + 1)
    coef[ell::2] = z_coef
    return Polynomial(coef)


def _ode_terms(params, ell, lam, f0, f1, f2, r):
    m, N = params.m, params.N
    mu = spherical_eigenvalue(N, ell)
    one = 1.0 - r * r
    return (
        f2,
        (N - 1) / r * f1,
        -2.0 / (m - 1.0) * r / one * f1,
        2.0 * lam / (m - 1.0) / one * f0,
        -mu / (r * r) * f0,
    )


def _derivatives(f, r, h=1e-4):
    if isinstance(f, Polynomial):
        return f(r), f.deriv(1)(r), f.deriv(2)(r)
    f0 = f(r)
    fp, fm = f(r + h), f(r - h)
    return f0, (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)


def ode_residual(params, ell, lam, f, r, scaled=False):
    """Left side of the radial eigenvalue ODE at r in (0, 1).

    f'' + ((N-1)/r - 2r/((m-1)(1-r^2))) f' + (2 lam/((m-1)(1-r^2)) - mu/r^2) f

    Polynomials are differentiated exactly; other callables by central
    differences.  With ``scaled=True`` the residual is divided by the sum of
    the absolute values of the individual terms.
    """
    r = np.asarray(r, dtype=float)
    if np.any((r <= 0) | (r >= 1)):
        raise DomainError("r must lie in the open interval (0, 1)")
    terms = _ode_terms(params, ell, lam, *_derivatives(f, r), r)
    res = sum(terms)
    if scaled:
        scale = sum(np.abs(t) for t in terms)
        res = res / np.where(scale > 0, scale, 1.0)
    return res[()]


def real_spherical_harmonic(N, ell, n, omega):
    """Real orthonormal spherical harmonic Y_{ell n} at unit vectors ``omega``."""
    omega = np.asarray(omega, dtype=float)
    if N == 1:
        if n != 1 or ell > 1:
            raise DomainError("N = 1 has the single harmonic n = 1 for ell in {0, 1}")
        return np.sign(omega) ** ell
    if N == 2:
        theta = np.arctan2(omega[..., 1], omega[..., 0])
        if ell == 0:
            if n != 1:
                raise DomainError("ell = 0 has a single harmonic")
            return np.full(theta.shape, 1.0 / math.sqrt(2.0 * math.pi))[()]
        if n == 1:
            return np.cos(ell * theta) / math.sqrt(math.pi)
        if n == 2:
            return np.sin(ell * theta) / math.sqrt(math.pi)
        raise DomainError("N = 2 harmonics are indexed by n in {1, 2}")
    if N == 3:
        if not 1 <= n <= 2 * ell + 1:
            raise DomainError(f"n must lie in 1..{2 * ell + 1}")
        order = n - ell - 1
        am = abs(order)
        cos_t = np.clip(omega[..., 2], -1.0, 1.0)
        phi = np.arctan2(omega[..., 1], omega[..., 0])
        norm = math.sqrt((2 * ell + 1) / (4 * math.pi) * math.factorial(ell - am) / math.factorial(ell + am))
        # lpmv carries the Condon-Shortley phase; undo it
        legendre = (-1) ** am * lpmv(am, ell, cos_t)
        if order == 0:
            return norm * legendre
        if order > 0:
            return math.sqrt(2.0) * norm * legendre * np.cos(am * phi)
        return math.sqrt(2.0) * norm * legendre * np.sin(am * phi)
    raise UnsupportedDimensionError(f"spherical harmonics are only evaluated for N <= 3 (got N = {N})")


def full_eigenfunction(params, mode, x):
    """psi_{ell n k}(x) = f_{ell k}(|x|) Y_{ell n}(x/|x|) for |x| <= 1."""
    N = params.N
    if N >= 4:
        raise UnsupportedDimensionError("eigenfunctions are only evaluated for N <= 3; use multiplicity() for counts")
    check_mode(params, mode.ell, mode.k)
    if not 1 <= mode.n <= multiplicity(params, mode.ell):
        raise DomainError(f"n must lie in 1..{multiplicity(params, mode.ell)}")
    x = np.asarray(x, dtype=float)
    if N == 1:
        r = np.abs(x)
        omega = np.where(x < 0, -1.0, 1.0)
    else:
        if x.shape[-1] != N:
            raise DomainError(f"points must have trailing dimension {N}")
        r = np.linalg.norm(x, axis=-1)
        safe = np.where(r > 0, r, 1.0)[..., None]
        omega = np.where(r[..., None] > 0, x / safe, np.eye(N)[0])
    if np.any(r > 1.0 + 1e-14):
        raise DomainError("eigenfunctions are evaluated on the closed unit ball")
    f = radial_eigenfunction(params, mode.ell, mode.k)
    value = f(r) * real_spherical_harmonic(N, mode.ell, mode.n, omega)
    if mode.ell >= 1:
        value = np.where(r > 0, value, 0.0)
    return np.asarray(value)[()]


def delta_rho_eigenfunction(params, ell, k, r):
    """Density-level eigenfunction (lambda/m) rho_*^(2-m) f_{ell k}(r).

    For m > 2 the weight diverges at r = 1 and ``inf`` is returned there.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > 1):
        raise DomainError("r must lie in [0, 1]")
    lam = eigenvalue(params, ell, k)
    f = radial_eigenfunction(params, ell, k)
    with np.errstate(divide="ignore"):
        weight = barenblatt_of_abs(params, r) ** (2.0 - params.m)
    fr = f(r)
    out = lam / params.m * weight * fr
    # at a divergent endpoint keep the sign of f instead of inf * 0 -> nan
    out = np.where(np.isinf(weight), np.copysign(np.inf, fr), out)
    return np.asarray(out)[()]


def spectrum_table(params, ell_max, k_max):
    """All eigenvalues with ell <= ell_max and k <= k_max, sorted by (lambda, ell, k)."""
    if ell_max < 0 or k_max < 0:
        raise DomainError("limits must be non-negative")
    ell_top = min(ell_max, 1) if params.N == 1 else ell_max
    entries = [
        SpectrumEntry(ell, k, eigenvalue(params, ell, k), multiplicity(params, ell), ell + 2 * k)
        for ell in range(ell_top + 1)
        for k in range(k_max + 1)
        if (ell, k) != (0, 0)
    ]
    return sorted(entries, key=lambda e: (e.lam, e.ell, e.k))


def _affine_coefficients(N, ell, k):
    """lambda = A + B (m - 1) with exact rational A, B."""
    return Fraction(ell + 2 * k), Fraction(2 * k) * (k + ell + Fraction(N, 2) - 1)


def level_crossing_exact(N, mode1, mode2, m_range=None):
    """Exact rational m > 1 at which the two eigenvalue branches meet, or None."""
    probe = Parameters(2.0, N)
    for ell, k in (mode1, mode2):
        check_mode(probe, ell, k)
    if tuple(mode1) == tuple(mode2):
        raise DomainError("modes must be distinct")
    a1, b1 = _affine_coefficients(N, *mode1)
    a2, b2 = _affine_coefficients(N, *mode2)
    if b1 == b2:
        return None
    m = 1 + (a2 - a1) / (b1 - b2)
    if m <= 1:
        return None
    if m_range is not None:
        lo, hi = m_range
        if not lo <= m <= hi:
            return None
    return m


def level_crossing(N, mode1, mode2, m_range=None):
    """Value m > 1 where lambda_{mode1}(m) = lambda_{mode2}(m); None if the branches never meet there.

    Both eigenvalues are affine in m, so the crossing is solved in closed form
    with rational arithmetic and converted to float at the end.
    """
    m = level_crossing_exact(N, mode1, mode2, m_range)
    return None if m is None else float(m)
