import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad

from pme_lab import DomainError, Parameters, RadialField
from pme_lab.profile import (
    barenblatt_density,
    barenblatt_field,
    barenblatt_mass,
    dissipation,
    entropy,
    rescale,
    selfsimilar_density,
    unrescale,
)


def test_parameters_validate_and_alpha():
    p = Parameters(2.0, 3)
    assert abs(p.alpha - 1.0 / (3 * 1.0 + 2)) <= 1e-15
    for bad in [(1.0, 1), (0.5, 2), (2.0, 0), (2.0, 1.5), (float("nan"), 1)]:
        with pytest.raises(DomainError):
            Parameters(*bad)


def test_barenblatt_center_edge_and_hand_value():
    assert_allclose(barenblatt_density(Parameters(2, 1), 0.0), 0.25, rtol=1e-15)
    for m in (1.2, 2.0, 3.5):
        assert barenblatt_density(Parameters(m, 2), 1.0) == 0.0
    assert_allclose(barenblatt_density(Parameters(3, 2), 0.6), math.sqrt(2 / 6 * 0.64), rtol=1e-14)
    assert_allclose(barenblatt_density(Parameters(3, 2), 0.6), 0.461880, atol=5e-7)
    with pytest.raises(DomainError):
        barenblatt_density(Parameters(2, 1), -0.1)


@given(st.floats(1.05, 6.0), st.integers(1, 5))
@settings(max_examples=60, deadline=None)
def test_profile_normalization_and_support(m, N):
    p = Parameters(m, N)
    r = np.linspace(0.0, 1.0, 101)
    rho = barenblatt_density(p, r)
    assert_allclose(2 * m / (m - 1) * rho ** (m - 1) + r**2, 1.0, atol=1e-14)
    outside = barenblatt_density(p, np.array([1.0, 1.01, 2.0, 10.0]))
    assert np.all(outside == 0.0)
    assert np.all(barenblatt_density(p, r[:-1]) > 0)


def test_mass_matches_quadrature():
    for m, N in [(1.5, 1), (2, 2), (3, 3)]:
        p = Parameters(m, N)
        area = 2 * math.pi ** (N / 2) / math.gamma(N / 2)
        oracle = area * quad(lambda r: barenblatt_density(p, r) * r ** (N - 1), 0, 1, epsabs=0, epsrel=1e-13)[0]
        assert_allclose(barenblatt_mass(p), oracle, rtol=1e-11)


def test_selfsimilar_center_and_outside():
    p = Parameters(2, 1)
    assert_allclose(selfsimilar_density(p, 1.0, 1.0, 0.0), 1.0, rtol=1e-15)
    a = p.alpha
    edge = math.sqrt(2 * p.m * 1.0 * 4.0 ** (2 * a) / (a * (p.m - 1)))
    assert selfsimilar_density(p, 1.0, 4.0, edge * 1.0001) == 0.0


def test_selfsimilar_mass_is_constant_in_time():
    p = Parameters(2, 1)
    a = p.alpha
    masses = []
    for t in (1, 2, 4):
        edge = np.sqrt(2 * p.m * t ** (2 * a) / (a * (p.m - 1)))
        masses.append(quad(lambda x: selfsimilar_density(p, 1.0, t, x), -edge, edge, epsabs=0, epsrel=1e-12)[0])
    assert_allclose(masses, masses[0], rtol=1e-8)


def test_rescale_identity_at_t1_and_profile_match():
    p = Parameters(2.0, 2)
    L = 0.7
    x = np.array([[0.3, -0.2], [0.1, 0.5]])
    t_hat, x_hat, _ = rescale(p, L, 1.0, x, 1.0)
    beta = math.sqrt(2 * p.m * L / (p.alpha * (p.m - 1)))
    assert t_hat == 0.0
    assert_allclose(x_hat, x / beta, rtol=1e-15)
    for t in (0.5, 1.0, 3.0):
        rho = selfsimilar_density(p, L, t, x)
        _, xh, rh = rescale(p, L, t, x, rho)
        assert_allclose(rh, barenblatt_density(p, np.linalg.norm(xh, axis=-1)), atol=1e-12)


@given(
    st.floats(1.1, 4.0),
    st.integers(1, 3),
    st.floats(0.01, 100.0),
    st.floats(-5.0, 5.0),
    st.floats(0.0, 10.0),
)
@settings(max_examples=80, deadline=None)
def test_rescale_round_trip(m, N, t, x, rho):
    p = Parameters(m, N)
    back = unrescale(p, 0.9, *rescale(p, 0.9, t, x, rho))
    assert_allclose(back, (t, x, rho), rtol=1e-12, atol=1e-300)


def test_entropy_zero_and_oracle():
    p = Parameters(2, 1)
    g = np.linspace(-1.5, 1.5, 301)
    assert entropy(p, RadialField(g, np.zeros_like(g))) == 0.0
    oracle = quad(lambda x: barenblatt_density(p, abs(x)) ** 2 + 0.5 * x * x * barenblatt_density(p, abs(x)), -1, 1)[0]
    assert_allclose(entropy(p, barenblatt_field(p, g)), oracle, rtol=1e-8)


def test_entropy_radial_oracle():
    p = Parameters(3, 2)
    g = np.linspace(0, 1.2, 241)

    def integrand(r):
        d = barenblatt_density(p, r)
        return (d**3 / 2 + 0.5 * r * r * d) * r

    oracle = 2 * math.pi * quad(integrand, 0, 1, epsrel=1e-13)[0]
    assert_allclose(entropy(p, barenblatt_field(p, g)), oracle, rtol=1e-8)


def test_profile_minimizes_entropy_against_dilation():
    for m, N in [(2, 1), (1.5, 2), (3, 3)]:
        p = Parameters(m, N)
        g = np.linspace(0, 1.5, 601)
        lam = 1.1
        dilated = RadialField.from_function(g, lambda r: lam ** (-N) * barenblatt_density(p, np.abs(r) / lam))
        assert entropy(p, barenblatt_field(p, g)) < entropy(p, dilated)


def test_entropy_from_samples_without_source():
    p = Parameters(2, 1)
    g = np.linspace(-1.5, 1.5, 3001)
    sampled = RadialField(g, barenblatt_density(p, np.abs(g)))
    assert_allclose(entropy(p, sampled), entropy(p, barenblatt_field(p, g)), rtol=1e-6)


def test_dissipation_vanishes_on_profile():
    for m, N in [(2, 1), (1.5, 2), (3, 3)]:
        p = Parameters(m, N)
        g = np.linspace(-1.5, 1.5, 601) if N == 1 else np.linspace(0, 1.5, 601)
        assert abs(dissipation(p, barenblatt_field(p, g))) <= 1e-8


def test_dissipation_of_translate_matches_oracle():
    # on the support the chemical potential of a translate is x^2/2 + (1 - (x-a)^2)/2, with slope a
    p = Parameters(2, 1)
    a = 0.1
    g = np.linspace(-1.5, 1.5, 6001)
    shifted = RadialField(g, barenblatt_density(p, np.abs(g - a)))

    def integrand(x):
        h = 1e-6
        xi = lambda y: 0.5 * y * y + 2 * barenblatt_density(p, abs(y - a))
        return barenblatt_density(p, abs(x - a)) * ((xi(x + h) - xi(x - h)) / (2 * h)) ** 2

    oracle = quad(integrand, a - 1, a + 1, epsrel=1e-12)[0]
    assert_allclose(oracle, a * a * barenblatt_mass(p), rtol=1e-8)
    assert_allclose(dissipation(p, shifted), oracle, rtol=1e-6)


@given(st.lists(st.floats(0.0, 2.0), min_size=5, max_size=40))
@settings(max_examples=50, deadline=None)
def test_dissipation_nonnegative(values):
    g = np.linspace(-1.5, 1.5, len(values))
    assert dissipation(Parameters(2.5, 1), RadialField(g, values)) >= 0.0


def test_field_validation_and_serialization():
    with pytest.raises(DomainError):
        RadialField([0, 1, 0.5], [0, 0, 0])
    with pytest.raises(DomainError):
        RadialField([0, 1], [1, -1])
    f = RadialField(np.linspace(0, 1, 5), np.linspace(1, 0, 5))
    back = RadialField.from_csv(f.to_csv())
    assert_allclose(back.values, f.values, rtol=0)
    back = RadialField.from_json(f.to_json())
    assert_allclose(back.grid, f.grid, rtol=0)
    assert f.to_csv().splitlines()[0] == "r,value"
