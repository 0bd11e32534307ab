"""Pochhammer symbols and the Gauss hypergeometric function F(a, b; c; z)."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError

_INT_TOL = 1e-12
_MAX_TERMS = 10**6


def _nonpositive_integer(x, tol=_INT_TOL):
    n = round(x)
    return n <= 0 and abs(x - n) <= tol


@dataclass(frozen=True)
class HypParams:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if _nonpositive_integer(self.c):
            raise DomainError(f"c = {self.c} is a non-positive integer")

    @property
    def terminating_degree(self):
        """k if a (or b) equals -k for a non-negative integer k, else None."""
        for s in (self.a, self.b):
            if _nonpositive_integer(s):
                return -round(s)
        return None


def pochhammer(s, j):
    """Rising factorial (s)_j = s (s+1) ... (s+j-1), with (s)_0 = 1."""
    if j < 0:
        raise DomainError("j must be non-negative")
    out = 1.0
    for i in range(j):
        out *= s + i
    return out


def hyp_poly_coefficients(k, b, c):
    """Coefficients (in z) of the terminating series F(-k, b; c; z)."""
    if k < 0:
        raise DomainError("k must be non-negative")
    if _nonpositive_integer(c):
        raise DomainError(f"c = {c} is a non-positive integer")
    coef = np.empty(k + 1)
    t = 1.0
    coef[0] = t
    for j in range(k):
        # t_{j+1} = t_j (a+j)(b+j) / ((c+j)(j+1)) with a = -k
        t *= (-k + j) * (b + j) / ((c + j) * (j + 1))
        coef[j + 1] = t
    return coef


def hyp_poly(k, b, c, z):
    """F(-k, b; c; z) as an exact (k+1)-term sum."""
    coef = hyp_poly_coefficients(k, b, c)
    return np.polynomial.polynomial.polyval(z, coef)


def _series_scalar(a, b, c, z, tol):
    total = 1.0
    term = 1.0
    small = 0
    for j in range(_MAX_TERMS):
        term *= (a + j) * (b + j) / ((c + j) * (j + 1)) * z
        total += term
        if term == 0.0:
            return total
        if abs(term) <= tol * abs(total):
            small += 1
            if small >= 3:
                return total
        else:
            small = 0
    raise NumericalError(f"hypergeometric series did not converge in {_MAX_TERMS} terms")


def hyp_series(p, z, tol=1e-17):
    """Partial sum of the Gauss series for |z| < 1.

    Summation stops once three consecutive terms fall below ``tol`` times the
    running sum.  A non-positive integer ``a`` or ``b`` gives the exact
    polynomial.
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any(np.abs(z_arr) >= 1.0):
        raise DomainError("hypergeometric series requires |z| < 1")
    k = p.terminating_degree
    if k is not None:
        other = p.b if _nonpositive_integer(p.a) else p.a
        return np.asarray(hyp_poly(k, other, p.c, z_arr))[()]
    out = np.vectorize(lambda x: _series_scalar(p.a, p.b, p.c, x, tol), otypes=[float])(z_arr)
    return out[()]


def hyp_derivative(p, z, tol=1e-17):
    """d/dz F(a, b; c; z) = (ab/c) F(a+1, b+1; c+1; z)."""
    if p.a == 0.0 or p.b == 0.0:
        return np.zeros_like(np.asarray(z, dtype=float))[()]
    shifted = HypParams(p.a + 1.0, p.b + 1.0, p.c + 1.0)
    return p.a * p.b / p.c * hyp_series(shifted, z, tol)
