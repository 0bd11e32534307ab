"""Finite-element rediscovery of the radial spectrum.

For each spherical degree ``ell`` the radial operator is discretized through
its density-level weak form

    A(f, g) = m int_0^1 rho_* (f'g' + mu f g / r^2) r^(N-1) dr
    B(f, g) =   int_0^1 rho_*^(2-m) f g r^(N-1) dr

with mu = ell(ell + N - 2), using continuous Lagrange elements of degree p on
Gauss-Lobatto nodes.  The no-flux condition at r = 1 is natural.  For
ell >= 1 the basis function at r = 0 is removed; for ell = 0 the constants
(kernel of A) are deflated before solving A v = lambda B v.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy import linalg

from .errors import AssemblyError, ConditioningError, DomainError
from .quadrature import gauss_jacobi_right, gauss_legendre
from .spectrum import check_mode, eigenvalue, spherical_eigenvalue


@dataclass(frozen=True)
class RadialGrid:
    """Element breakpoints on [0, 1], element degree and grading exponent."""

    nodes: np.ndarray
    degree: int = 3
    grading: float = 1.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 5:
            raise DomainError("a radial grid needs at least 4 elements")
        if nodes[0] != 0.0 or nodes[-1] != 1.0 or np.any(np.diff(nodes) <= 0):
            raise DomainError("grid nodes must increase strictly from 0 to 1")
        if self.degree < 1:
            raise DomainError("element degree must be >= 1")
        if self.grading < 1.0:
            raise DomainError("grading exponent must be >= 1")

    @classmethod
    def graded(cls, elements, degree=3, grading=1.0):
        """Breakpoints 1 - (1 - xi)^g for uniform xi; g = 1 is a uniform mesh."""
        xi = np.linspace(0.0, 1.0, elements + 1)
        nodes = 1.0 - (1.0 - xi) ** grading
        nodes[0], nodes[-1] = 0.0, 1.0
        return cls(nodes, degree, grading)

    @property
    def elements(self):
        return self.nodes.size - 1

    def refined(self):
        """Same grading and degree with twice the number of elements."""
        return RadialGrid.graded(2 * self.elements, self.degree, self.grading)


def _lobatto_points(p):
    inner = npleg.Legendre.basis(p).deriv().roots() if p > 1 else np.array([])
    return np.concatenate([[-1.0], np.sort(inner.real), [1.0]])


class _ReferenceElement:
    """Lagrange shape functions on Gauss-Lobatto points of [-1, 1]."""

    def __init__(self, p):
        self.p = p
        self.points = _lobatto_points(p)
        self._coef = np.linalg.inv(npleg.legvander(self.points, p))
        self._dcoef = np.zeros((p + 1, p + 1))
        for k in range(p + 1):
            d = npleg.legder(np.eye(p + 1)[k])
            self._dcoef[k, : d.size] = d

    def values(self, x):
        return npleg.legvander(np.asarray(x, dtype=float), self.p) @ self._coef

    def derivatives(self, x):
        # row k of _dcoef holds P_k' in the Legendre basis
        V = npleg.legvander(np.asarray(x, dtype=float), self.p)
        return V @ (self._dcoef.T @ self._coef)


@dataclass
class DiscreteForms:
    """Assembled Hessian form ``A`` and weighted-L2 form ``B`` for one ``ell``."""

    A: np.ndarray
    B: np.ndarray
    ell: int = None
    params: object = None
    grid: RadialGrid = None
    free: np.ndarray = field(default=None, repr=False)
    node_coords: np.ndarray = field(default=None, repr=False)
    rules: list = field(default=None, repr=False)

    @property
    def size(self):
        return self.A.shape[0]

    def full_vector(self, coeffs):
        out = np.zeros(self.node_coords.size)
        out[self.free] = coeffs
        return out

    def evaluate(self, coeffs, r):
        """Evaluate the finite-element function with free coefficients ``coeffs``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        full = self.full_vector(coeffs)
        ref = _ReferenceElement(self.grid.degree)
        p = self.grid.degree
        nodes = self.grid.nodes
        idx = np.clip(np.searchsorted(nodes, r, side="right") - 1, 0, self.grid.elements - 1)
        out = np.empty_like(r)
        for e in np.unique(idx):
            sel = idx == e
            a, b = nodes[e], nodes[e + 1]
            xi = 2.0 * (r[sel] - a) / (b - a) - 1.0
            out[sel] = ref.values(xi) @ full[e * p : e * p + p + 1]
        return out

    def energies(self, coeffs):
        """(A(v, v), B(v, v)) summed from non-negative quadrature contributions.

        Unlike ``v @ A @ v`` this involves no cancellation between large
        stiffness entries, so the ratio is accurate to a few ulps.
        """
        full = self.full_vector(coeffs)
        p = self.grid.degree
        ref = _ReferenceElement(p)
        mu = spherical_eigenvalue(self.params.N, self.ell)
        ea = eb = 0.0
        for e, ((ra, wa), (rb, wb)) in enumerate(self.rules):
            a, b = self.grid.nodes[e], self.grid.nodes[e + 1]
            h = b - a
            local = full[e * p : e * p + p + 1]
            xa = 2.0 * (ra - a) / h - 1.0
            dv = ref.derivatives(xa) @ local * (2.0 / h)
            ea += np.sum(wa * dv * dv)
            if mu:
                v = ref.values(xa) @ local
                ea += mu * np.sum(wa * v * v / (ra * ra))
            vb = ref.values(2.0 * (rb - a) / h - 1.0) @ local
            eb += np.sum(wb * vb * vb)
        return float(ea), float(eb)

    def interpolate(self, f):
        """Free nodal coefficients of the interpolant of ``f``."""
        return np.asarray(f(self.node_coords), dtype=float)[self.free]


def _element_rules(params, grid, quad_order, ell):
    """Per-element quadrature (points, weights) for the A-weight and B-weight."""
    m, N = params.m, params.N
    exp_a = 1.0 / (m - 1.0)
    exp_b = (2.0 - m) / (m - 1.0)
    kappa = params.center_value
    rules = []
    last = grid.elements - 1
    for e in range(grid.elements):
        a, b = grid.nodes[e], grid.nodes[e + 1]
        n = quad_order + (4 if e == 0 and ell >= 1 else 0)
        per = []
        for expo, scale in ((exp_a, m * kappa), (exp_b, kappa ** (2.0 - m))):
            if e == last:
                r, w = gauss_jacobi_right(a, b, n, expo)
                w = w * (1.0 + r) ** expo
            else:
                r, w = gauss_legendre(a, b, n)
                w = w * (1.0 - r * r) ** expo
            per.append((r, scale * w * r ** (N - 1)))
        rules.append(per)
    return rules


def assemble_forms(params, ell, grid, quad_order=None):
    """Assemble the dense symmetric matrices (A, B) on ``grid`` for degree ``ell``."""
    check_mode(params, ell, 0, allow_ground=True)
    p = grid.degree
    quad_order = quad_order or 2 * p + 4
    mu = spherical_eigenvalue(params.N, ell)
    ref = _ReferenceElement(p)
    ndof = grid.elements * p + 1
    A = np.zeros((ndof, ndof))
    B = np.zeros((ndof, ndof))
    coords = np.empty(ndof)
    rules = _element_rules(params, grid, quad_order, ell)
    for e in range(grid.elements):
        a, b = grid.nodes[e], grid.nodes[e + 1]
        h = b - a
        sl = slice(e * p, e * p + p + 1)
        coords[sl] = a + 0.5 * h * (ref.points + 1.0)
        (ra, wa), (rb, wb) = rules[e]
        xa = 2.0 * (ra - a) / h - 1.0
        phi_a = ref.values(xa)
        dphi_a = ref.derivatives(xa) * (2.0 / h)
        local_a = (dphi_a.T * wa) @ dphi_a
        if mu:
            local_a += mu * (phi_a.T * (wa / (ra * ra))) @ phi_a
        phi_b = ref.values(2.0 * (rb - a) / h - 1.0)
        local_b = (phi_b.T * wb) @ phi_b
        A[sl, sl] += local_a
        B[sl, sl] += local_b
    coords[0], coords[-1] = 0.0, 1.0
    free = np.arange(1, ndof) if ell >= 1 else np.arange(ndof)
    A = A[np.ix_(free, free)]
    B = B[np.ix_(free, free)]
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise AssemblyError("non-finite entries in assembled forms")
    return DiscreteForms(A, B, ell, params, grid, free, coords, rules)


def _deflation_basis(forms):
    """Orthonormal basis of the B-orthogonal complement of the constant vector."""
    ones = np.ones(forms.size)
    return linalg.null_space((forms.B @ ones)[None, :])


def solve_generalized(forms, count, deflate=None, polish=True):
    """Smallest ``count`` eigenpairs of A v = lambda B v, ascending.

    B is factored as L L^T and the problem reduced to the standard symmetric
    one L^-1 A L^-T y = lambda y, solved by Householder tridiagonalization and
    implicit QL/QR (LAPACK ``syev``).  Eigenvectors are B-orthonormal and
    signed so that their largest-magnitude entry is positive.  ``deflate``
    defaults to ``ell == 0``.

    The dense solver resolves eigenvalues only to about eps * ||L^-1 A L^-T||,
    which at fine resolution exceeds the discretization error.  With
    ``polish`` each eigenvalue is replaced by the Rayleigh quotient of its
    eigenvector, evaluated by :meth:`DiscreteForms.energies`; the eigenvector
    error enters only quadratically.
    """
    if deflate is None:
        deflate = forms.ell == 0
    A, B = forms.A, forms.B
    Z = None
    if deflate:
        Z = _deflation_basis(forms)
        A = Z.T @ A @ Z
        B = Z.T @ B @ Z
    if count > A.shape[0]:
        raise DomainError("more eigenpairs requested than basis functions")
    try:
        L = linalg.cholesky(B, lower=True)
    except linalg.LinAlgError as exc:
        smallest = np.linalg.eigvalsh(B)[0]
        raise ConditioningError(
            f"Cholesky factorization of B failed (smallest eigenvalue {smallest:.3e}, size {B.shape[0]})"
        ) from exc
    tmp = linalg.solve_triangular(L, A, lower=True)
    C = linalg.solve_triangular(L, tmp.T, lower=True)
    C = 0.5 * (C + C.T)
    values, Y = linalg.eigh(C, driver="ev")
    values, Y = values[:count], Y[:, :count]
    V = linalg.solve_triangular(L, Y, lower=True, trans="T")
    if Z is not None:
        V = Z @ V
    pivot = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[pivot, np.arange(V.shape[1])])
    if polish and forms.rules is not None:
        values = np.array([np.divide(*forms.energies(v)) for v in V.T])
    return values, V


@dataclass
class SpectrumReport:
    """Closed-form versus numerical eigenvalues for one spherical degree."""

    ell: int
    rows: list
    elements: int
    degree: int
    refined_errors: list = None
    converged: bool = None

    @property
    def max_error(self):
        return max(row["rel_error"] for row in self.rows)

    @property
    def reduction(self):
        """Ratio of the largest error to the largest error after refinement."""
        if not self.refined_errors:
            return None
        return self.max_error / max(max(self.refined_errors), np.finfo(float).tiny)

    def records(self):
        return [dict(row) for row in self.rows]


def _compare(params, ell, grid, count):
    forms = assemble_forms(params, ell, grid)
    if count > forms.size // 2:
        raise DomainError(f"count must not exceed half the basis size ({forms.size // 2})")
    values, _ = solve_generalized(forms, count)
    k0 = 1 if ell == 0 else 0
    rows = []
    for i, lam_h in enumerate(values):
        k = k0 + i
        lam = eigenvalue(params, ell, k)
        rows.append(
            {
                "ell": ell,
                "k": k,
                "lambda_closed": lam,
                "lambda_numeric": float(lam_h),
                "rel_error": abs(lam_h - lam) / lam,
            }
        )
    return rows


def numerical_spectrum(params, ell, resolution=(128, 3), count=4, grading=1.0, refine=True):
    """Compare the lowest ``count`` numerical eigenvalues with the closed form.

    With ``refine`` the computation is repeated on a uniformly refined grid
    (twice the elements).  ``converged`` records whether the largest relative
    error dropped at least twofold; single modes whose eigenfunction lies in
    the element space sit at machine precision on both grids and cannot
    shrink further, which is why the maximum is compared.
    """
    elements, degree = resolution
    grid = RadialGrid.graded(elements, degree, grading)
    rows = _compare(params, ell, grid, count)
    report = SpectrumReport(ell, rows, elements, degree)
    if refine:
        fine = _compare(params, ell, grid.refined(), count)
        report.refined_errors = [row["rel_error"] for row in fine]
        report.converged = bool(report.reduction >= 2.0)
    return report
