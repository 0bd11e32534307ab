import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from pme_lab.errors import DomainError
from pme_lab.hypergeo import HypParams, hyp_derivative, hyp_poly, hyp_series, pochhammer


def test_pochhammer_cases():
    assert pochhammer(2.7, 0) == 1.0
    assert pochhammer(3, 2) == 12.0
    assert pochhammer(-2, 4) == 0.0


def test_poly_hand_values():
    assert hyp_poly(0, 1.3, 2.2, 0.7) == 1.0
    assert_allclose(hyp_poly(1, 2, 1, 0.3), 1 - 2 * 0.3, rtol=1e-15)
    assert abs(hyp_poly(2, 3, 2, 0.5)) <= 1e-15


def test_series_identities():
    assert hyp_series(HypParams(0.3, 0.4, 1.7), 0.0) == 1.0
    assert_allclose(hyp_series(HypParams(1, 2, 2), 0.5), 2.0, rtol=1e-14)


def test_series_against_extended_precision_sum():
    mpmath.mp.dps = 40
    a, b, c, z = mpmath.mpf("0.5"), mpmath.mpf("0.5"), mpmath.mpf("1.5"), mpmath.mpf("0.25")
    total, term = mpmath.mpf(0), mpmath.mpf(1)
    for j in range(10_000):
        total += term
        term *= (a + j) * (b + j) / ((c + j) * (j + 1)) * z
    assert_allclose(hyp_series(HypParams(0.5, 0.5, 1.5), 0.25), float(total), rtol=1e-12)


def test_domain_errors():
    with pytest.raises(DomainError):
        HypParams(1, 1, -2.0)
    with pytest.raises(DomainError):
        HypParams(1, 1, 1e-13)
    with pytest.raises(DomainError):
        hyp_series(HypParams(1, 1, 1), 1.0)
    with pytest.raises(DomainError):
        hyp_series(HypParams(-2, 1, 1), -1.5)


def test_derivative_cases():
    assert_allclose(hyp_derivative(HypParams(0, 2, 3), np.array([0.1, 0.5])), 0.0)
    assert_allclose(hyp_derivative(HypParams(-1, 2, 1), np.array([-0.5, 0.0, 0.7])), -2.0, rtol=1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.2, 4))
@settings(max_examples=60, deadline=None)
def test_derivative_matches_finite_difference(a, b, c):
    p = HypParams(a, b, c)
    h = 1e-6
    fd = (hyp_series(p, 0.3 + h) - hyp_series(p, 0.3 - h)) / (2 * h)
    assert abs(hyp_derivative(p, 0.3) - fd) <= 1e-6 * max(1.0, abs(fd))


@given(st.floats(-4, 4), st.floats(-4, 4), st.floats(0.3, 5), st.floats(-0.9, 0.9))
@settings(max_examples=100, deadline=None)
def test_symmetry_in_a_and_b(a, b, c, z):
    f1 = hyp_series(HypParams(a, b, c), z)
    f2 = hyp_series(HypParams(b, a, c), z)
    assert abs(f1 - f2) <= 1e-12 * max(1.0, abs(f1))


@pytest.mark.parametrize("k", range(11))
def test_terminating_series_equals_polynomial(k):
    z = np.linspace(-0.95, 0.95, 23)
    series = hyp_series(HypParams(-k, 2.5, 1.5), z)
    poly = hyp_poly(k, 2.5, 1.5, z)
    assert_allclose(series, poly, rtol=1e-12, atol=1e-12)


def test_polynomial_matches_mpmath_for_large_degree():
    # the terms alternate in sign; accuracy is relative to the sum of their magnitudes
    k, b, c = 40, 3.5, 2.5
    for z in (0.1, 0.6, 0.99):
        scale = float(mpmath.hyp2f1(-k, b, c, -z))
        assert abs(hyp_poly(k, b, c, z) - float(mpmath.hyp2f1(-k, b, c, z))) <= 1e-13 * scale
