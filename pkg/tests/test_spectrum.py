import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import Polynomial
from numpy.testing import assert_allclose
from scipy.special import roots_legendre

from pme_lab import DomainError, Parameters, UnsupportedDimensionError
from pme_lab.quadrature import radial_rule
from pme_lab.spectrum import (
    ModeIndex,
    delta_rho_eigenfunction,
    eigenvalue,
    full_eigenfunction,
    level_crossing,
    level_crossing_exact,
    multiplicity,
    ode_residual,
    radial_eigenfunction,
    real_spherical_harmonic,
    spectrum_table,
)


def test_eigenvalue_hand_values():
    for m, N in [(1.5, 1), (2, 2), (3, 3), (1.2, 5)]:
        p = Parameters(m, N)
        assert eigenvalue(p, 1, 0) == 1
        assert_allclose(eigenvalue(p, 0, 1), 2 + N * (m - 1), rtol=1e-15)
    assert eigenvalue(Parameters(2, 2), 1, 1) == 7
    with pytest.raises(DomainError):
        eigenvalue(Parameters(2, 2), 0, 0)
    with pytest.raises(DomainError):
        eigenvalue(Parameters(2, 1), 2, 0)


def test_eigenvalues_on_the_line_for_m2():
    # b = 1/(m-1) + ell + N/2 - 1 + k, so lambda_{1k} = 1 + 2k + 2k(k + 1/2)
    p = Parameters(2, 1)
    assert [eigenvalue(p, 1, k) for k in range(3)] == [1, 6, 15]


@given(st.sampled_from([1.01, 1.5, 2.0, 3.0, 10.0]), st.integers(1, 6))
@settings(max_examples=30, deadline=None)
def test_eigenvalues_positive_and_monotone(m, N):
    p = Parameters(m, N)
    ells = range(2) if N == 1 else range(11)
    for ell in ells:
        lams = [eigenvalue(p, ell, k) for k in range(11) if (ell, k) != (0, 0)]
        assert all(v > 0 for v in lams)
        assert all(b > a for a, b in zip(lams, lams[1:]))
    for k in range(11):
        lams = [eigenvalue(p, ell, k) for ell in ells if (ell, k) != (0, 0)]
        assert all(b > a for a, b in zip(lams, lams[1:]))


def test_ornstein_uhlenbeck_limit():
    p = Parameters(1 + 1e-6, 3)
    for e in spectrum_table(p, 4, 4):
        assert abs(e.lam - (e.ell + 2 * e.k)) <= 1e-4


def test_multiplicity():
    assert multiplicity(Parameters(2, 1), 1) == 1
    for N in range(2, 8):
        assert multiplicity(Parameters(2, N), 0) == 1
        assert multiplicity(Parameters(2, N), 1) == N
    assert multiplicity(Parameters(2, 2), 5) == 2
    assert multiplicity(Parameters(2, 3), 4) == 9
    # dimension of harmonic polynomials of degree ell in N variables
    for N in range(2, 7):
        for ell in range(6):
            expected = math.comb(N + ell - 1, ell) - (math.comb(N + ell - 3, ell - 2) if ell >= 2 else 0)
            assert multiplicity(Parameters(2, N), ell) == expected
    with pytest.raises(OverflowError):
        multiplicity(Parameters(2, 60), 60)


def test_eigenfunction_closed_forms():
    for m, N in [(1.5, 1), (2, 3)]:
        p = Parameters(m, N)
        for ell in (0, 1):
            f = radial_eigenfunction(p, ell, 0)
            assert_allclose(f.coef, np.eye(ell + 1)[ell])
        f01 = radial_eigenfunction(p, 0, 1)
        assert_allclose(f01.coef, [1.0, 0.0, -(1 + 2 / (N * (m - 1)))], rtol=1e-15)
        # proportional to 1 - |x|^2 / (alpha (m-1) N)
        assert_allclose(f01.coef[2], -1.0 / (p.alpha * (m - 1) * N), rtol=1e-12)


def test_eigenfunction_on_the_line_for_m2():
    f = radial_eigenfunction(Parameters(2, 1), 1, 1)
    assert_allclose(f.coef, [0.0, 1.0, 0.0, -5.0 / 3.0], rtol=1e-15)


@pytest.mark.parametrize("m,N", [(1.5, 1), (2, 2), (3, 3), (1.2, 4)])
def test_eigenpairs_solve_the_radial_ode(m, N):
    p = Parameters(m, N)
    r = np.linspace(0.005, 0.995, 100)
    for ell in range(2 if N == 1 else 5):
        for k in range(5):
            if (ell, k) == (0, 0):
                continue
            f = radial_eigenfunction(p, ell, k)
            assert f.degree() == ell + 2 * k
            res = ode_residual(p, ell, eigenvalue(p, ell, k), f, r, scaled=True)
            assert np.max(np.abs(res)) <= 1e-10


def test_ode_residual_cases():
    p = Parameters(2, 2)
    for ell in range(4):
        f = Polynomial(np.eye(ell + 1)[ell])
        if ell:
            assert_allclose(ode_residual(p, ell, ell, f, np.linspace(0.1, 0.9, 9)), 0.0, atol=1e-12)
    f = radial_eigenfunction(p, 1, 1)
    assert abs(ode_residual(p, 1, eigenvalue(p, 1, 1) + 0.1, f, 0.5)) >= 1e-3
    # a non-polynomial callable goes through finite differences
    fd = ode_residual(p, 1, eigenvalue(p, 1, 1), lambda r: f(r), np.array([0.3, 0.6]), scaled=True)
    assert np.max(np.abs(fd)) <= 1e-6
    with pytest.raises(DomainError):
        ode_residual(p, 1, 1.0, f, np.array([0.0, 0.5]))


@pytest.mark.parametrize("m,N", [(1.5, 1), (2, 2), (3, 3)])
def test_eigenfunctions_are_b_orthogonal(m, N):
    p = Parameters(m, N)
    r, w = radial_rule((2 - m) / (m - 1), N, 60)
    for ell in range(2 if N == 1 else 3):
        fs = [radial_eigenfunction(p, ell, k)(r) for k in range(6)]
        G = np.array([[np.sum(w * a * b) for b in fs] for a in fs])
        d = np.sqrt(np.diag(G))
        off = np.abs(G / np.outer(d, d) - np.eye(6))
        ks = slice(1, None) if ell == 0 else slice(None)
        assert np.max(off[ks, ks]) <= 1e-8


def _sphere_quadrature(N, n=24):
    if N == 2:
        th = 2 * np.pi * np.arange(4 * n) / (4 * n)
        return np.stack([np.cos(th), np.sin(th)], axis=-1), np.full(th.size, 2 * np.pi / th.size)
    x, wx = roots_legendre(n)
    ph = 2 * np.pi * np.arange(2 * n) / (2 * n)
    X, P = np.meshgrid(x, ph, indexing="ij")
    s = np.sqrt(1 - X**2)
    pts = np.stack([s * np.cos(P), s * np.sin(P), X], axis=-1).reshape(-1, 3)
    w = np.outer(wx, np.full(ph.size, 2 * np.pi / ph.size)).ravel()
    return pts, w


@pytest.mark.parametrize("N", [2, 3])
def test_spherical_harmonics_orthonormal(N):
    pts, w = _sphere_quadrature(N)
    p = Parameters(2, N)
    Y = [
        real_spherical_harmonic(N, ell, n, pts)
        for ell in range(5)
        for n in range(1, multiplicity(p, ell) + 1)
    ]
    G = np.array([[np.sum(w * a * b) for b in Y] for a in Y])
    assert_allclose(G, np.eye(len(Y)), atol=1e-10)


def test_full_eigenfunction_examples():
    p1 = Parameters(1.7, 1)
    x = np.linspace(-1, 1, 11)
    assert_allclose(full_eigenfunction(p1, ModeIndex(1, 0), x), x, atol=1e-15)
    p2 = Parameters(2, 2)
    v = full_eigenfunction(p2, ModeIndex(0, 1), np.array([0.6, 0.0]))
    assert_allclose(v, radial_eigenfunction(p2, 0, 1)(0.6) / math.sqrt(2 * math.pi), rtol=1e-14)
    with pytest.raises(UnsupportedDimensionError):
        full_eigenfunction(Parameters(2, 4), ModeIndex(1, 0), np.zeros(4))
    with pytest.raises(DomainError):
        full_eigenfunction(p2, ModeIndex(1, 0, 3), np.array([0.1, 0.2]))


def test_delta_rho_eigenfunction():
    p = Parameters(2, 3)
    r = np.linspace(0, 1, 7)
    for ell, k in [(0, 1), (1, 2), (2, 0)]:
        f = radial_eigenfunction(p, ell, k)
        assert_allclose(delta_rho_eigenfunction(p, ell, k, r), eigenvalue(p, ell, k) * f(r) / 2, rtol=1e-14)
    assert delta_rho_eigenfunction(Parameters(1.5, 2), 1, 1, 0.0) == 0.0
    assert np.isinf(delta_rho_eigenfunction(Parameters(3, 2), 0, 1, 1.0))
    with pytest.raises(DomainError):
        delta_rho_eigenfunction(p, 0, 1, 1.2)


def test_delta_rho_matches_direct_differentiation():
    p = Parameters(2, 1)
    f = radial_eigenfunction(p, 0, 1)
    rho = Polynomial([0.25, 0.0, -0.25])
    direct = -(rho * f.deriv()).deriv()
    r = np.linspace(0, 1, 21)
    assert_allclose(delta_rho_eigenfunction(p, 0, 1, r), direct(r), atol=1e-12)


def test_spectrum_table():
    table = spectrum_table(Parameters(1.5, 2), 3, 1)
    assert [e.lam for e in table[:3]] == [1, 2, 3]
    tied = {(e.ell, e.k) for e in table if e.lam == 3}
    assert tied == {(0, 1), (3, 0)}
    pairs = [(e.ell, e.k) for e in table]
    assert len(pairs) == len(set(pairs))
    assert all(e.lam > 0 for e in table)
    rec = table[0].as_record()
    assert list(rec) == ["ell", "k", "lambda", "multiplicity", "degree"]


def test_level_crossings():
    for N in (1, 2, 3, 5):
        m = level_crossing_exact(N, (3, 0), (0, 1)) if N > 1 else None
        if N > 1:
            assert N * (m - 1) == 1
            assert level_crossing(N, (3, 0), (0, 1)) == float(1 + Fraction(1, N))
    assert level_crossing(3, (3, 0), (0, 1)) == 4 / 3
    assert level_crossing(2, (1, 0), (2, 0)) is None
    for N in (2, 3, 4):
        for ell in range(3, 8):
            assert level_crossing_exact(N, (ell, 0), (0, 1)) == 1 + Fraction(ell - 2, N)
    assert level_crossing(3, (3, 0), (0, 1), m_range=(1.5, 2.0)) is None
