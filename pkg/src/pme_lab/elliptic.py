"""Weighted Poisson problem, its inverse, Hardy-Poincare and spectral-gap checks.

The Poisson problem is

    -div(rho_* grad psi) = u  in the unit ball,   rho_* d psi/dn = 0 on its boundary,

solved for one spherical degree ``ell`` on the finite-element basis of
:mod:`pme_lab.radial_eigensolver`.  Functions of r are passed either as
:class:`~pme_lab.profile.RadialField` (their exact ``source`` is used when
available) or as plain callables.
"""

import json
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg

from .errors import ConditioningError, DomainError
from .profile import RadialField, barenblatt_of_abs
from .quadrature import gauss_jacobi_right, gauss_legendre, radial_rule, sphere_area
from .radial_eigensolver import RadialGrid, _ReferenceElement, assemble_forms
from .spectrum import check_mode, spherical_eigenvalue

COMPATIBILITY_TOL = 1e-10


def _callable(u):
    if isinstance(u, RadialField):
        return u.at
    if callable(u):
        return u
    raise DomainError("expected a RadialField or a callable of r")


def _last_element_rule(params, a, b, n):
    """Quadrature for the element touching r = 1.

    For m > 2 inputs of the form rho_*^(2-m) g blow up like (1-r)^((2-m)/(m-1));
    that factor is taken into the Gauss-Jacobi weight.  Otherwise the
    integrand is bounded and a geometrically graded Gauss-Legendre rule
    resolves the loss of smoothness at r = 1.
    """
    e_b = (2.0 - params.m) / (params.m - 1.0)
    if e_b < 0:
        r, w = gauss_jacobi_right(a, b, n, e_b)
        return r, w, (1.0 + r) ** e_b * (1.0 - r * r) ** (-e_b)
    cuts = a + (b - a) * np.concatenate([[0.0], 1.0 - 0.5 ** np.arange(1, 25), [1.0]])
    parts = [gauss_legendre(lo, hi, n) for lo, hi in zip(cuts[:-1], cuts[1:])]
    r = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts])
    return r, w, np.ones_like(r)


def _load_vector(params, grid, fn, n=None):
    """(int u phi_i r^(N-1) dr)_i over all global nodes, plus int |u| r^(N-1) dr."""
    p = grid.degree
    n = n or 2 * p + 6
    ref = _ReferenceElement(p)
    load = np.zeros(grid.elements * p + 1)
    total_abs = 0.0
    for e in range(grid.elements):
        a, b = grid.nodes[e], grid.nodes[e + 1]
        if e == grid.elements - 1:
            r, w, corr = _last_element_rule(params, a, b, n)
            # u is evaluated as (u * (1-r^2)^(-e)) * (1-r^2)^e; the weight carries the second factor
            vals = np.asarray(fn(r), dtype=float) * corr
        else:
            r, w = gauss_legendre(a, b, n)
            vals = np.asarray(fn(r), dtype=float)
        w = w * r ** (params.N - 1)
        phi = ref.values(2.0 * (r - a) / (b - a) - 1.0)
        load[e * p : e * p + p + 1] += phi.T @ (w * vals)
        total_abs += np.sum(w * np.abs(vals))
    return load, total_abs


def poisson_solve(params, ell, u, grid=None):
    """Solve the weighted Poisson problem for the degree-``ell`` radial part.

    Weak form: int rho_* (psi' g' + mu psi g / r^2) r^(N-1) dr = int u g r^(N-1) dr
    for all g in the element space.  For ``ell = 0`` the data must have zero
    mean (relative tolerance ``COMPATIBILITY_TOL``) and the solution is the
    representative with zero rho_*^(2-m)-weighted mean.

    Returns a potential :class:`RadialField` on the element nodes whose
    ``source`` evaluates the finite-element solution anywhere in [0, 1].
    """
    check_mode(params, ell, 0, allow_ground=True)
    grid = grid or RadialGrid.graded(128, 3)
    fn = _callable(u)
    forms = assemble_forms(params, ell, grid)
    K = forms.A / params.m
    load, total_abs = _load_vector(params, grid, fn)
    if not np.isfinite(total_abs):
        raise DomainError("right-hand side is not integrable against the element basis")
    b = load[forms.free]
    if ell == 0:
        mean = b.sum()
        if abs(mean) > COMPATIBILITY_TOL * max(total_abs, np.finfo(float).tiny):
            raise DomainError(f"ell = 0 data must have zero mean (int u r^(N-1) dr = {mean:.3e})")
        ones = np.ones(forms.size)
        weight = forms.B @ ones
        b = b - mean * weight / weight.sum()
        Z = linalg.null_space(weight[None, :])
        K_red, b_red = Z.T @ K @ Z, Z.T @ b
    else:
        Z = None
        K_red, b_red = K, b
    if total_abs == 0.0:
        y = np.zeros(K_red.shape[0])
    else:
        try:
            factor = linalg.cho_factor(K_red, lower=True)
        except linalg.LinAlgError as exc:
            raise ConditioningError("stiffness matrix is not positive definite") from exc
        y = linalg.cho_solve(factor, b_red)
    coeffs = y if Z is None else Z @ y
    nodes = forms.node_coords
    return RadialField(
        nodes,
        forms.full_vector(coeffs),
        "potential",
        source=lambda r, c=coeffs: forms.evaluate(c, r).reshape(np.shape(r)),
    )


def _poly_derivatives(poly):
    return poly, poly.deriv(1), poly.deriv(2)


def _shift_down(poly, power):
    """poly / r^power, dropping the (vanishing) low coefficients."""
    c = poly.coef
    scale = max(np.max(np.abs(c)), 1.0)
    if c.size > power and np.any(np.abs(c[:power]) > 1e-12 * scale):
        return None
    return Polynomial(c[power:] if c.size > power else [0.0])


def _field_derivatives(psi, r):
    """(psi, psi', psi'') at r: exact for polynomial sources, else centered differences."""
    src = psi.source
    if isinstance(src, Polynomial):
        return tuple(d(r) for d in _poly_derivatives(src))
    g = psi.grid
    idx = np.clip(np.searchsorted(g, r), 1, g.size - 1)
    h = 0.5 * (g[idx] - g[idx - 1])
    f0, fp, fm = psi.at(r), psi.at(r + h), psi.at(r - h)
    return f0, (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)


def _angular_terms(params, ell, psi, r):
    """-(N-1) psi'/r + mu psi/r^2, regular at r = 0 for admissible psi."""
    N = params.N
    mu = spherical_eigenvalue(N, ell)
    src = psi.source
    if isinstance(src, Polynomial):
        x = Polynomial([0.0, 1.0])
        combined = _shift_down(-(N - 1) * x * src.deriv() + mu * src, 2)
        if combined is not None:
            return combined(r)
    f0, f1, _ = _field_derivatives(psi, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -(N - 1) * f1 / r + mu * f0 / (r * r)
    return out


def _hessian_action(params, ell, psi, r):
    """H psi = -m rho^(m-1) (psi'' + (N-1)psi'/r - mu psi/r^2) + r psi'."""
    m = params.m
    _, f1, f2 = _field_derivatives(psi, r)
    pressure = (m - 1.0) / (2.0 * m) * np.maximum(1.0 - r * r, 0.0)
    return -m * pressure * (f2 - _angular_terms(params, ell, psi, r)) + r * f1


def apply_L_inverse(params, ell, psi):
    """delta_rho = -(r^(N-1) rho_* psi')' / r^(N-1) + mu rho_* psi / r^2.

    Uses m rho_*^(m-2) rho_*' = -r, so that delta_rho = rho_*^(2-m) H psi / m
    with H psi as in :func:`_hessian_action`.  The returned field carries an
    exact ``source`` when ``psi`` does.  For m > 2 the value at r = 1 is
    infinite whenever psi'(1) != 0.
    """
    check_mode(params, ell, 0, allow_ground=True)
    if psi.on_line:
        raise DomainError("apply_L_inverse expects a radial field on [0, 1]")

    def delta(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = barenblatt_of_abs(params, r) ** (2.0 - params.m)
            out = w * _hessian_action(params, ell, psi, r) / params.m
        return np.where(np.isnan(out), np.copysign(np.inf, out), out)

    inside = psi.grid[(psi.grid >= 0) & (psi.grid <= 1)]
    return RadialField(inside, delta(inside), "potential", source=delta)


def _integration_rule(params, psi, exponent, n=48):
    """(x, w) with sum w g(x) ~ int g(x) (1-|x|^2)^e dx over the support, up to the sphere factor.

    Line fields (N = 1 on [-1, 1]) integrate both half-lines; radial fields
    carry r^(N-1).
    """
    r, w = radial_rule(exponent, params.N, n)
    if params.N == 1 and psi.on_line:
        return np.concatenate([-r[::-1], r]), np.concatenate([w[::-1], w]), 1.0
    return r, w, sphere_area(params.N)


def _gradient_squared(params, ell, psi, x, line):
    _, f1, _ = _field_derivatives(psi, x)
    g = f1 * f1
    mu = spherical_eigenvalue(params.N, ell)
    if mu and not line:
        f0 = psi.at(x)
        g = g + mu * f0 * f0 / (x * x)
    return g


def hardy_poincare_ratio(params, p, psi, ell=0):
    """(lhs, rhs, ratio) for inf_c int rho_*^(p-m) (psi-c)^2 dx <= C int rho_* |grad psi|^2 dx.

    The infimum is attained at c = int rho_*^(p-m) psi / int rho_*^(p-m).
    Both sides use the full N-dimensional measure.
    """
    m = params.m
    if not p > 1.0 or p + m < 3.0 - 1e-12:
        raise DomainError("need p > 1 and p + m >= 3")
    line = params.N == 1 and psi.on_line
    kappa = params.center_value
    e_lhs = (p - m) / (m - 1.0)
    x, w, area = _integration_rule(params, psi, e_lhs)
    vals = psi.at(x)
    w = w * kappa ** (p - m)
    c = np.sum(w * vals) / np.sum(w)
    lhs = area * np.sum(w * (vals - c) ** 2)
    x, w, area = _integration_rule(params, psi, 1.0 / (m - 1.0))
    rhs = area * kappa * np.sum(w * _gradient_squared(params, ell, psi, x, line))
    if not rhs > 1e-14 * max(lhs, 1.0):
        raise DomainError("psi is constant on the support (vanishing Dirichlet energy)")
    return float(lhs), float(rhs), float(lhs / rhs)


def hardy_poincare_bound(params, p, degree=8, line=None):
    """Best constant C of the Hardy-Poincare ratio over polynomials of degree <= ``degree``.

    Polynomials in x on [-1, 1] for line fields (default when N = 1), in r
    otherwise.  C is the largest generalized eigenvalue of (lhs-form,
    rhs-form) on the complement of constants.
    """
    line = params.N == 1 if line is None else line
    probe = RadialField(np.array([-1.0, 1.0]) if line else np.array([0.0, 1.0]), np.zeros(2), "potential")
    basis = [Polynomial(np.eye(degree + 1)[j]) for j in range(1, degree + 1)]
    m = params.m
    kappa = params.center_value
    x, w, _ = _integration_rule(params, probe, (p - m) / (m - 1.0))
    w = w * kappa ** (p - m)
    V = np.array([b(x) for b in basis])
    V = V - (V @ w)[:, None] / w.sum()
    M = (V * w) @ V.T
    x, w, _ = _integration_rule(params, probe, 1.0 / (m - 1.0))
    D = np.array([b.deriv()(x) for b in basis])
    K = kappa * (D * w) @ D.T
    return float(linalg.eigh(M, K, eigvals_only=True)[-1])


def spectral_gap_check(params, psi, ell):
    """(gnorm, hess_value) with gnorm = int rho_* |grad psi|^2 and hess_value the entropy Hessian.

    gnorm     = int rho_* (psi'^2 + mu psi^2/r^2) r^(N-1) dr
    hess      = m int rho_*^(m-2) (delta_rho)^2 r^(N-1) dr
              = (1/m) int rho_*^(2-m) (H psi)^2 r^(N-1) dr

    The sharp bound gnorm <= hess holds with equality exactly on the
    translation mode.  Line fields (N = 1) integrate over [-1, 1].
    """
    m = params.m
    line = params.N == 1 and psi.on_line
    if not line:
        check_mode(params, ell, 0, allow_ground=True)
    eff_ell = 0 if line else ell
    kappa = params.center_value
    x, w, _ = _integration_rule(params, psi, 1.0 / (m - 1.0))
    gnorm = kappa * np.sum(w * _gradient_squared(params, eff_ell, psi, x, line))
    x, w, _ = _integration_rule(params, psi, (2.0 - m) / (m - 1.0))
    if line:
        # on the line the angular terms vanish
        _, f1, f2 = _field_derivatives(psi, x)
        h = -m * (m - 1.0) / (2.0 * m) * (1.0 - x * x) * f2 + x * f1
    else:
        h = _hessian_action(params, eff_ell, psi, x)
    hess = kappa ** (2.0 - m) * np.sum(w * h * h) / m
    return float(gnorm), float(hess)


def random_polynomial(rng, degree, ell=0, radial=True):
    """Polynomial with coefficients uniform in [-1, 1].

    Radial samples have the form r^ell P(r^2) (smooth in N dimensions);
    line samples are general polynomials of the given degree in x.
    """
    if not radial:
        return Polynomial(rng.uniform(-1.0, 1.0, degree + 1))
    inner = rng.uniform(-1.0, 1.0, max((degree - ell) // 2, 0) + 1)
    coef = np.zeros(ell + 2 * (inner.size - 1) + 1)
    coef[ell::2] = inner
    return Polynomial(coef)


@dataclass
class CheckReport:
    lhs: float
    rhs: float
    ratio: float
    seed: int
    params: dict

    def to_json(self):
        return json.dumps(
            {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "seed": self.seed, "params": self.params}
        )
