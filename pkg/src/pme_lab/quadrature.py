"""Gauss rules for radial integrals with an endpoint weight at r = 1.

All radial integrals in the package have the form

    int_0^1 g(r) (1 - r^2)^e r^(N-1) dr,     e > -1,

with g smooth on [0, 1].  The weight is absorbed by Gauss-Jacobi nodes on the
element touching r = 1 so that no point evaluation at the degenerate endpoint
ever happens.
"""

from functools import lru_cache
from math import gamma, pi

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def sphere_area(N):
    """Surface measure of the unit sphere S^(N-1); 2 for N = 1 (two points)."""
    return 2.0 * pi ** (N / 2.0) / gamma(N / 2.0)


@lru_cache(maxsize=256)
def _legendre(n):
    x, w = roots_legendre(n)
    return x, w


@lru_cache(maxsize=256)
def _jacobi(n, alpha):
    x, w = roots_jacobi(n, alpha, 0.0)
    return x, w


def gauss_legendre(a, b, n):
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b]."""
    x, w = _legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def gauss_jacobi_right(a, b, n, alpha):
    """Rule for int_a^b g(r) (b - r)^alpha dr, exact for polynomial g of degree 2n-1."""
    if alpha == 0.0:
        return gauss_legendre(a, b, n)
    x, w = _jacobi(n, float(alpha))
    half = 0.5 * (b - a)
    # (b - r) = half * (1 - x)  =>  (b - r)^alpha = half^alpha (1 - x)^alpha
    return a + half * (x + 1.0), w * half ** (alpha + 1.0)


def radial_rule(exponent, N, n=48, split=0.5):
    """Nodes r and weights w with sum(w * g(r)) ~ int_0^1 g (1-r^2)^e r^(N-1) dr.

    The interval is split at ``split``: Gauss-Legendre on the inner part and
    Gauss-Jacobi in (1 - r) on the outer part, where the remaining factor
    (1 + r)^e is smooth.  Converges geometrically for smooth g.
    """
    if exponent <= -1.0:
        raise ValueError("weight exponent must exceed -1")
    r0, w0 = gauss_legendre(0.0, split, n)
    w0 = w0 * (1.0 - r0**2) ** exponent * r0 ** (N - 1)
    r1, w1 = gauss_jacobi_right(split, 1.0, n, exponent)
    w1 = w1 * (1.0 + r1) ** exponent * r1 ** (N - 1)
    return np.concatenate([r0, r1]), np.concatenate([w0, w1])


def even_radial_rule(exponent, N, n):
    """Rule exact for int_0^1 P(r^2) (1-r^2)^e r^(N-1) dr with deg P <= 2n - 1.

    Uses z = r^2, which turns the integral into a single Gauss-Jacobi
    integral with weight (1 - z)^e z^(N/2 - 1).
    """
    x, w = roots_jacobi(n, float(exponent), N / 2.0 - 1.0)
    z = 0.5 * (x + 1.0)
    # dz = dx/2, (1-z)^e z^b = 2^{-e-b} (1-x)^e (1+x)^b, extra 1/2 from dr = dz / (2 r) * r^{N-1}
    scale = 0.5 ** (exponent + N / 2.0 - 1.0) * 0.5 * 0.5
    return np.sqrt(z), w * scale
