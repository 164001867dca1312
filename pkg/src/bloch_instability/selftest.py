"""Small oracle suite behind ``bloch-instab selftest``."""
from __future__ import annotations

import warnings

import numpy as np

from .bloch import (SpatialGrid, bloch_transform, inverse_bloch, isometry_defect,
                    random_band_limited)
from .contour import Contour
from .evolution import dense_box_evolve, linear_evolve, nonlinear_evolve
from .growth import instability_time, polynomial_bound
from .operators import (Nonlinearity, PeriodicCoefficient, assemble_bloch_matrix,
                        heat_operator, kdvks_operator, mathieu_operator, symbol_eval)
from .projections import eigenbasis_projector, riesz_projector
from .spectra import XiGrid, bloch_spectrum, hypothesis_partition


def _check(name, value, tol):
    return {"name": name, "value": float(value), "tol": float(tol), "passed": bool(value <= tol)}


def _symbol_error(op, n_xi=16, M=8):
    s = bloch_spectrum(op, XiGrid.uniform(n_xi), M)
    worst = 0.0
    for m, xi in enumerate(s.xi):
        expected = np.array([symbol_eval(op, k + xi) for k in range(-M, M + 1)])
        got = s.eigenvalues[m]
        worst = max(worst, max(np.min(np.abs(expected - g)) for g in got))
    return worst


def run_all():
    out = []
    grid = SpatialGrid(8, 64)
    f = random_band_limited(grid, 6, seed=11, real=False)
    out.append(_check("bloch isometry defect", isometry_defect(f), 1e-8))
    back = inverse_bloch(bloch_transform(f))
    out.append(_check("bloch round trip", np.linalg.norm(back.values - f.values) / np.linalg.norm(f.values), 1e-10))
    out.append(_check("heat spectrum vs symbol", _symbol_error(heat_operator()), 1e-10))
    out.append(_check("KdV-KS spectrum vs symbol", _symbol_error(kdvks_operator(0.1)), 1e-10))
    mat = mathieu_operator(1.0)
    lo = np.linalg.eigvals(assemble_bloch_matrix(mat, 0.0, 32).entries)
    hi = np.linalg.eigvals(assemble_bloch_matrix(mat, 0.0, 64).entries)
    small = lambda lam: lam[np.argmin(np.abs(lam))]
    out.append(_check("Mathieu truncation refinement", abs(small(lo) - small(hi)), 1e-10))
    B = assemble_bloch_matrix(mat, 0.2, 12)
    lam = np.sort(np.linalg.eigvals(B.entries).real)[::-1]
    gamma = Contour.circle(lam[0], (lam[0] - lam[1]) / 2)
    P = riesz_projector(B, gamma)
    out.append(_check("Riesz vs eigenbasis projector", np.abs(P - eigenbasis_projector(B, gamma)).max(), 1e-8))
    small_grid = SpatialGrid(4, 32)
    op = kdvks_operator(0.3, PeriodicCoefficient.cosine(0.4))
    u = random_band_limited(small_grid, 4, seed=5)
    a, b = linear_evolve(op, u, 2.0), dense_box_evolve(op, u, 2.0)
    out.append(_check("Bloch semigroup vs dense box", (a - b).l2 / b.l2, 1e-8))
    traj = nonlinear_evolve(op, Nonlinearity("none"), u, 1.0, 2.0, 0.05)
    out.append(_check("nonlinear(kind=none) vs linear", (traj.final - a).l2 / a.l2, 1e-8))
    pb = polynomial_bound(2, 0.05, 1.0, 1.5, 1.0)
    out.append(_check("polynomial bound critical point", abs(pb.z_star - 2.5) + abs(pb.g_star + 0.25), 1e-12))
    dT = instability_time(0.1, 5e-4, 0.25) - instability_time(0.1, 1e-3, 0.25)
    out.append(_check("instability time identity", abs(dT - np.log(2) / 0.25), 1e-12))
    s = bloch_spectrum(heat_operator(shift=1.0), XiGrid.uniform(32), 6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        part = hypothesis_partition(s, 0.75)
    closed = np.array([sum(1.0 - (k + xi) ** 2 > 0.75 for k in range(-6, 7)) for xi in s.xi])
    out.append(_check("heat+c partition counts", np.abs(part.counts - closed).max(), 0))
    return out
