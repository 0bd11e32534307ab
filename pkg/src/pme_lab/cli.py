"""Command-line interface: ``pme-lab <subcommand> [flags]``.

Exit codes: 0 success, 1 validation error (including bad flags), 2 numerical
or I/O failure.  All output is deterministic for fixed flags.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np
from numpy.polynomial import Polynomial

from . import elliptic, radial_eigensolver, simulator, spectrum
from .errors import DomainError, NumericalError
from .profile import Parameters, RadialField, barenblatt_of_abs
from .quadrature import radial_rule
from .report import (
    EIGENSOLVE_COLUMNS,
    SERIES_COLUMNS,
    SPECTRUM_COLUMNS,
    dumps_json,
    format_report,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


def thread_count():
    """Worker cap from PME_LAB_THREADS (0 or unset: number of CPUs)."""
    raw = os.environ.get("PME_LAB_THREADS", "0")
    try:
        n = int(raw)
    except ValueError as exc:
        raise DomainError(f"PME_LAB_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise DomainError("PME_LAB_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _params(args):
    return Parameters(args.m, args.dim)


def cmd_spectrum(args):
    p = _params(args)
    rows = [e.as_record() for e in spectrum.spectrum_table(p, args.lmax, args.kmax)]
    return format_report(rows, args.format, SPECTRUM_COLUMNS)


def cmd_eigenfunction(args):
    p = _params(args)
    spectrum.check_mode(p, args.l, args.k)
    if args.samples < 2:
        raise DomainError("--samples must be >= 2")
    f = spectrum.radial_eigenfunction(p, args.l, args.k)
    r = np.linspace(0.0, 1.0, args.samples)
    delta = spectrum.delta_rho_eigenfunction(p, args.l, args.k, r)
    rows = [{"r": float(a), "f": float(b), "delta_rho": float(c)} for a, b, c in zip(r, f(r), delta)]
    return format_report(rows, args.format, ("r", "f", "delta_rho"))


def cmd_verify(args):
    p = _params(args)
    if args.elements < 4 or args.degree < 1 or args.count < 1:
        raise DomainError("need --elements >= 4, --degree >= 1, --count >= 1")
    report = radial_eigensolver.numerical_spectrum(p, args.l, (args.elements, args.degree), args.count)
    if args.format == "csv":
        return format_report(report.records(), "csv", EIGENSOLVE_COLUMNS)
    return dumps_json(
        {
            "params": {"m": p.m, "N": p.N},
            "ell": args.l,
            "elements": args.elements,
            "degree": args.degree,
            "rows": report.records(),
            "refined_errors": report.refined_errors,
            "reduction": report.reduction,
            "converged": report.converged,
        }
    )


def cmd_simulate(args):
    p = _params(args)
    mode = simulator.mode_by_name(args.mode)
    spectrum.check_mode(p, mode.ell, mode.k)
    if not args.tmax > 0 or not args.observe > 0:
        raise DomainError("--tmax and --observe must be positive")
    grid = simulator.SimGrid.for_mode(p, mode, args.cells)
    exp = simulator.decay_experiment(
        p, mode, args.amplitude, args.tmax, args.cells, args.observe, args.metric, workers=min(2, thread_count())
    )
    fit = exp.fit.as_record()
    if args.format == "csv":
        sys.stderr.write(
            f"rate={fit['rate']!r} predicted={exp.predicted!r} r_squared={fit['r_squared']!r}"
            + (f" flag={fit['flag']}" if fit["flag"] else "")
            + "\n"
        )
        return format_report(exp.perturbed.records, "csv", SERIES_COLUMNS)
    manifest = {
        "params": {"m": p.m, "N": p.N},
        "mode": {"ell": mode.ell, "k": mode.k, "n": mode.n},
        "s": args.amplitude,
        "grid": {"geometry": grid.geometry, "cells": grid.cells, "L_box": float(grid.edges[-1])},
        "dt": exp.perturbed.state.dt,
        "steps": exp.perturbed.state.steps,
        "seed": None,
    }
    return dumps_json(
        {
            "manifest": manifest,
            "metric": args.metric,
            "predicted_rate": exp.predicted,
            "fit": fit,
            "floor": exp.floor,
            "mass_drift": exp.perturbed.mass_drift,
            "series": [{c: r[c] for c in SERIES_COLUMNS} for r in exp.perturbed.records],
        }
    )


def cmd_check_hardy(args):
    p = _params(args)
    if args.samples < 1:
        raise DomainError("--samples must be >= 1")
    if not args.p > 1.0 or args.p + p.m < 3.0:
        raise DomainError("need p > 1 and p + m >= 3")
    rng = np.random.default_rng(args.seed)
    line = p.N == 1
    grid = np.linspace(-1.0, 1.0, 201) if line else np.linspace(0.0, 1.0, 201)
    polys = [elliptic.random_polynomial(rng, args.degree, radial=not line) for _ in range(args.samples)]

    def one(poly):
        field = RadialField.from_function(grid, poly, "potential")
        return elliptic.hardy_poincare_ratio(p, args.p, field)

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(one, polys))
    bound = elliptic.hardy_poincare_bound(p, args.p, args.degree, line=line)
    rows = [
        {"lhs": a, "rhs": b, "ratio": c, "seed": args.seed, "params": {"m": p.m, "N": p.N, "p": args.p}}
        for a, b, c in results
    ]
    if args.format == "csv":
        flat = [{"sample": i, "lhs": r["lhs"], "rhs": r["rhs"], "ratio": r["ratio"]} for i, r in enumerate(rows)]
        return format_report(flat, "csv", ("sample", "lhs", "rhs", "ratio"))
    return dumps_json(
        {
            "params": {"m": p.m, "N": p.N, "p": args.p},
            "seed": args.seed,
            "degree": args.degree,
            "bound": bound,
            "max_ratio": max(r["ratio"] for r in rows),
            "samples": rows,
        }
    )


def _manufactured_error(p, ell, elements, degree):
    """Solve with data generated from a known potential and measure the error."""
    x = Polynomial([0.0, 1.0])
    psi = x**ell * (x**2 - x**4) if ell == 0 else x**ell * (1.0 - x**2) ** 2
    g = np.linspace(0.0, 1.0, 201)
    u = elliptic.apply_L_inverse(p, ell, RadialField.from_function(g, psi, "potential"))
    grid = radial_eigensolver.RadialGrid.graded(elements, degree)
    sol = elliptic.poisson_solve(p, ell, u, grid)
    r, w = radial_rule((2.0 - p.m) / (p.m - 1.0), p.N, 64)
    w = w * p.center_value ** (2.0 - p.m)
    exact = psi(r)
    if ell == 0:
        exact = exact - np.sum(w * exact) / np.sum(w)
    err = float(np.sqrt(np.sum(w * (sol.at(r) - exact) ** 2)))
    return err, err / float(np.sqrt(np.sum(w * exact**2)))


def cmd_poisson(args):
    p = _params(args)
    spectrum.check_mode(p, args.l, 0, allow_ground=True)
    if args.manufactured:
        err, rel = _manufactured_error(p, args.l, args.elements, args.degree)
        kind = "manufactured"
    else:
        k = args.k if args.k is not None else (1 if args.l == 0 else 0)
        f = spectrum.radial_eigenfunction(p, args.l, k)
        grid = radial_eigensolver.RadialGrid.graded(args.elements, args.degree)
        sol = elliptic.poisson_solve(p, args.l, lambda r: spectrum.delta_rho_eigenfunction(p, args.l, k, r), grid)
        r, w = radial_rule((2.0 - p.m) / (p.m - 1.0), p.N, 64)
        w = w * p.center_value ** (2.0 - p.m)
        err = float(np.sqrt(np.sum(w * (sol.at(r) - f(r)) ** 2)))
        rel = err / float(np.sqrt(np.sum(w * f(r) ** 2)))
        kind = f"eigenfunction k={k}"
    return dumps_json(
        {
            "params": {"m": p.m, "N": p.N},
            "ell": args.l,
            "problem": kind,
            "elements": args.elements,
            "degree": args.degree,
            "error_weighted_L2": err,
            "relative_error": rel,
        }
    )


def cmd_crossings(args):
    if args.dim < 1:
        raise DomainError("--dim must be >= 1")
    m = spectrum.level_crossing_exact(args.dim, (args.l1, args.k1), (args.l2, args.k2))
    record = {
        "N": args.dim,
        "mode1": [args.l1, args.k1],
        "mode2": [args.l2, args.k2],
        "m": None if m is None else float(m),
        "m_exact": None if m is None else str(Fraction(m)),
        "lambda": None if m is None else spectrum.eigenvalue(Parameters(float(m), args.dim), args.l1, args.k1),
    }
    return dumps_json(record)


def build_parser():
    parser = _Parser(prog="pme-lab", description="Spectral analysis and simulation of the confined porous medium equation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, dim=True, m=True):
        if m:
            sp.add_argument("--m", type=float, required=True, help="nonlinearity exponent m > 1")
        if dim:
            sp.add_argument("--dim", type=int, required=True, help="space dimension N >= 1")
        sp.add_argument("--out", default=None, help="output path (default: standard output)")

    sp = sub.add_parser("spectrum", help="closed-form eigenvalue table")
    common(sp)
    sp.add_argument("--lmax", type=int, required=True)
    sp.add_argument("--kmax", type=int, required=True)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("eigenfunction", help="sample a radial eigenfunction")
    common(sp)
    sp.add_argument("--l", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--samples", type=int, default=101)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_eigenfunction)

    sp = sub.add_parser("verify-eigensolve", help="finite-element spectrum against the closed form")
    common(sp)
    sp.add_argument("--l", type=int, required=True)
    sp.add_argument("--elements", type=int, default=128)
    sp.add_argument("--degree", type=int, default=3)
    sp.add_argument("--count", type=int, default=4)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("simulate", help="perturbed-profile run with decay-rate fit")
    common(sp)
    sp.add_argument("--mode", required=True, help="translation, dilation or lk:L,K")
    sp.add_argument("--amplitude", type=float, required=True)
    sp.add_argument("--tmax", type=float, required=True)
    sp.add_argument("--cells", type=int, default=None)
    sp.add_argument("--observe", type=float, default=0.05, help="observation interval in rescaled time")
    sp.add_argument("--metric", choices=("d_L1", "d_weightedL2", "d_W2"), default="d_L1")
    sp.add_argument("--format", choices=("csv", "json"), default="json")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("check-hardy", help="Hardy-Poincare ratios over seeded random polynomials")
    common(sp)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--degree", type=int, default=8)
    sp.add_argument("--format", choices=("csv", "json"), default="json")
    sp.set_defaults(func=cmd_check_hardy)

    sp = sub.add_parser("poisson", help="weighted Poisson solver checks")
    common(sp)
    sp.add_argument("--l", type=int, required=True)
    sp.add_argument("--manufactured", action="store_true", help="use a manufactured solution")
    sp.add_argument("--k", type=int, default=None, help="eigenmode used when --manufactured is absent")
    sp.add_argument("--elements", type=int, default=128)
    sp.add_argument("--degree", type=int, default=3)
    sp.set_defaults(func=cmd_poisson)

    sp = sub.add_parser("crossings", help="exponent where two eigenvalue branches meet")
    common(sp, m=False)
    for name in ("--l1", "--k1", "--l2", "--k2"):
        sp.add_argument(name, type=int, required=True)
    sp.set_defaults(func=cmd_crossings)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    except SystemExit as exc:
        # --help exits with status 0
        return int(exc.code or 0)
    try:
        text = args.func(args)
        _emit(text, args.out)
    except (DomainError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (NumericalError, OSError, OverflowError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n" if not isinstance(exc, OSError) else f"I/O error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
