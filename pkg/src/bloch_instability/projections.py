"""Spectral projections per Floquet exponent and their assembly on the box."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .bloch import BlochField, SampledFunction, bloch_transform, inverse_bloch
from .contour import Contour
from .errors import (ContourError, CrossingWarning, DomainError, MarginalCountWarning,
                     ShapeError)
from .operators import PeriodicOperator, assemble_bloch_matrix
from .spectra import SpectrumSampling, lambda0

DEFAULT_EPS_GAP = 1e-6


def riesz_projector(B, gamma: Contour, eps_gap=DEFAULT_EPS_GAP, eigenvalues=None):
    """Dense Riesz projector ``(1/2 pi i) oint (zeta - B)^{-1} d zeta``."""
    A = B.entries if hasattr(B, "entries") else np.asarray(B, dtype=complex)
    n = A.shape[0]
    lam = np.linalg.eigvals(A) if eigenvalues is None else eigenvalues
    dist = gamma.distance(lam)
    if np.min(dist) < eps_gap:
        k = int(np.argmin(dist))
        raise ContourError(f"eigenvalue {lam[k]:.6g} lies within {eps_gap:g} of the contour", lam[k])
    nodes, weights = gamma.quadrature(hazards=lam)
    P = np.zeros((n, n), dtype=complex)
    eye = np.eye(n)
    for z, w in zip(nodes, weights):
        try:
            P += w * np.linalg.solve(z * eye - A, eye)
        except np.linalg.LinAlgError as exc:
            raise ContourError(f"resolvent is singular at zeta={z:.6g}", z) from exc
    return P


def spectral_projection(op: PeriodicOperator, xi: float, M: int, gamma: Contour, v,
                        eps_gap=DEFAULT_EPS_GAP):
    """Riesz projection of the Galerkin vector ``v`` at ``xi`` onto the spectrum inside ``gamma``.

    One dense solve per quadrature node.
    """
    B = assemble_bloch_matrix(op, xi, M)
    A = B.entries
    v = np.asarray(v, dtype=complex)
    if v.shape != (A.shape[0],):
        raise ShapeError(f"vector must have length {A.shape[0]}, got shape {v.shape}")
    lam = np.linalg.eigvals(A)
    dist = gamma.distance(lam)
    if np.min(dist) < eps_gap:
        k = int(np.argmin(dist))
        raise ContourError(f"eigenvalue {lam[k]:.6g} lies within {eps_gap:g} of the contour", lam[k])
    nodes, weights = gamma.quadrature(hazards=lam)
    out = np.zeros_like(v)
    eye = np.eye(A.shape[0])
    for z, w in zip(nodes, weights):
        try:
            out += w * np.linalg.solve(z * eye - A, v)
        except np.linalg.LinAlgError as exc:
            raise ContourError(f"resolvent is singular at zeta={z:.6g}", z) from exc
    return out


def eigenbasis_projector(B, gamma: Contour):
    """Sum of right-times-left eigenprojectors for eigenvalues inside ``gamma``."""
    A = B.entries if hasattr(B, "entries") else np.asarray(B, dtype=complex)
    lam, V = np.linalg.eig(A)
    inside = gamma.encloses(lam)
    W = np.linalg.inv(V)
    return V[:, inside] @ W[inside, :]


def _check_grid(u0: SampledFunction, s: SpectrumSampling):
    if s.xi_grid.count != u0.grid.periods or not np.allclose(s.xi, u0.grid.xi, atol=1e-14):
        raise ShapeError(f"spectrum has {s.xi_grid.count} xi samples; the box realizes "
                         f"{u0.grid.periods} Floquet exponents")
    if u0.components != s.operator.components:
        raise ShapeError(f"u0 has {u0.components} components, operator has {s.operator.components}")


def bloch_galerkin(u0: SampledFunction, M: int):
    """Galerkin vectors ``(N_per, d(2M+1))`` of the Bloch transform of ``u0``."""
    return bloch_transform(u0).galerkin(M)


def _from_galerkin(u0, vectors, M):
    return inverse_bloch(BlochField.from_galerkin(u0.grid, vectors, M, u0.components))


@dataclass(eq=False)
class ProjectionReport:
    """Activation analysis of one initial perturbation.

    ``masses[m, i]`` is ``||P_cluster(xi_m) u0check(xi_m)||`` for the eigenvalue
    cluster containing sorted index ``i``; ``indices[m - start]`` is the
    activating branch's eigen index at each ``xi_m`` in ``I``.
    """

    lambda_m: float
    lambda0: float
    p: float
    tau_act: float
    activated: bool
    branch_id: int | None
    xi_index: int | None
    eig_index: int | None
    start: int | None
    stop: int | None
    indices: np.ndarray | None
    activation_mass: float
    projector_norm_sup: float
    contour: Contour | None
    masses: np.ndarray
    sampling: SpectrumSampling = field(repr=False, default=None)

    @property
    def threshold(self):
        return self.lambda0 / self.p

    @property
    def interval(self):
        if self.start is None:
            return None
        h = self.sampling.xi_grid.spacing
        return float(self.sampling.xi[self.start]), float(self.sampling.xi[self.stop - 1] + h)

    @property
    def contour_floor(self):
        return None if self.contour is None else self.contour.real_floor

    @property
    def status(self):
        return "activated" if self.activated else "not_activated"

    def to_dict(self):
        return {
            "status": self.status,
            "lambda_m": self.lambda_m,
            "lambda0": self.lambda0,
            "p": self.p,
            "threshold": self.threshold,
            "tau_act": self.tau_act,
            "branch_id": self.branch_id,
            "xi": None if self.xi_index is None else float(self.sampling.xi[self.xi_index]),
            "interval": self.interval,
            "interval_indices": None if self.start is None else [self.start, self.stop],
            "activation_mass": self.activation_mass,
            "projector_norm_sup": self.projector_norm_sup,
            "contour": None if self.contour is None else self.contour.to_dict(),
            "contour_floor": self.contour_floor,
        }

    def mass_rows(self):
        """CSV rows ``(xi, branch_id, re_lambda, im_lambda, mass)``."""
        s = self.sampling
        rows = []
        branches = s.branches if s.xi_grid.count >= 16 else None
        for m, xi in enumerate(s.xi):
            for i in range(s.size):
                bid = -1
                if branches is not None:
                    bid = next(b.id for b in branches if b.indices[m] == i)
                lam = s.eigenvalues[m, i]
                rows.append((float(xi), bid, float(lam.real), float(lam.imag), float(self.masses[m, i])))
        return rows


def _cluster_of(s, m, i):
    for members in s.eigen_clusters(m):
        if i in members:
            return members
    raise IndexError(i)


def activation_masses(u0: SampledFunction, s: SpectrumSampling):
    """Masses of the eigenprojections of ``u0check`` for every ``(xi_m, eigen index)``."""
    _check_grid(u0, s)
    vecs = bloch_galerkin(u0, s.truncation)
    masses = np.zeros(s.eigenvalues.shape)
    for m in range(s.xi_grid.count):
        coeff = s.left_vectors(m) @ vecs[m]
        V = s.eigenvectors[m]
        for members in s.eigen_clusters(m):
            masses[m, members] = np.linalg.norm(V[:, members] @ coeff[members])
    return masses


def _report_contour(s, start, stop, indices, eps_gap):
    vals = np.array([s.eigenvalues[m, i] for m, i in zip(range(start, stop), indices)])
    others = []
    for m, i in zip(range(start, stop), indices):
        cluster = set(_cluster_of(s, m, i).tolist())
        others.extend(s.eigenvalues[m, k] for k in range(s.size) if k not in cluster)
    others = np.array(others)
    lo = complex(vals.real.min(), vals.imag.min())
    hi = complex(vals.real.max(), vals.imag.max())
    if others.size:
        dx = np.maximum(np.maximum(lo.real - others.real, others.real - hi.real), 0)
        dy = np.maximum(np.maximum(lo.imag - others.imag, others.imag - hi.imag), 0)
        gap = float(np.min(np.hypot(dx, dy)))
    else:
        gap = 1.0
    pad = max(min(gap / 2, 1.0), eps_gap)
    return Contour.rectangle(lo - pad * (1 + 1j), hi + pad * (1 + 1j))


def lambda_M(u0: SampledFunction, s: SpectrumSampling, tau_act: float | None = None,
             p: float = 2.0, eps_gap: float = DEFAULT_EPS_GAP) -> ProjectionReport:
    """Largest real part among eigenvalues activated by ``u0`` (mass above ``tau_act``)."""
    if tau_act is None:
        tau_act = 1e-8 * u0.l2
    masses = activation_masses(u0, s)
    lam0 = lambda0(s).value
    active = masses > tau_act
    if not active.any():
        return ProjectionReport(-np.inf, lam0, float(p), float(tau_act), False, None, None, None,
                                None, None, None, 0.0, 0.0, None, masses, s)
    re = np.where(active, s.eigenvalues.real, -np.inf)
    lam_m = float(re.max())
    # ties: prefer the largest mass among maximizers
    ties = np.argwhere(re >= lam_m)
    m0, i0 = max(map(tuple, ties), key=lambda mi: masses[mi])
    tracked = s.xi_grid.count >= 16
    if tracked:
        br = next(b for b in s.branches if b.indices[m0] == i0)
        bid, path = br.id, br.indices
        start, stop = m0, m0 + 1
        while start > 0 and masses[start - 1, path[start - 1]] > tau_act:
            start -= 1
        while stop < s.xi_grid.count and masses[stop, path[stop]] > tau_act:
            stop += 1
        indices = path[start:stop].copy()
    else:
        bid, start, stop, indices = None, m0, m0 + 1, np.array([i0])
    act_mass = float(min(masses[m, i] for m, i in zip(range(start, stop), indices)))
    norms = [np.linalg.norm(s.projector(m, _cluster_of(s, m, i)), 2)
             for m, i in zip(range(start, stop), indices)]
    contour = _report_contour(s, start, stop, indices, eps_gap)
    return ProjectionReport(lam_m, lam0, float(p), float(tau_act), lam_m > lam0 / p, bid,
                            int(m0), int(i0), start, stop, indices, act_mass, float(max(norms)),
                            contour, masses, s)


def project_P(u0: SampledFunction, report: ProjectionReport) -> SampledFunction:
    """Keep the activating branch's eigencomponent on ``I``; zero elsewhere."""
    if report.start is None or report.stop <= report.start:
        raise DomainError("projection needs a nonempty activation interval")
    s = report.sampling
    _check_grid(u0, s)
    vecs = bloch_galerkin(u0, s.truncation)
    out = np.zeros_like(vecs)
    for m, i in zip(range(report.start, report.stop), report.indices):
        out[m] = s.projector(m, _cluster_of(s, m, i)) @ vecs[m]
    return _from_galerkin(u0, out, s.truncation)


def complement_Pprime(u0: SampledFunction, s: SpectrumSampling, lambdaM: float,
                      eps_gap: float = DEFAULT_EPS_GAP) -> SampledFunction:
    """``u0`` minus its eigencomponents with ``Re lambda > lambdaM`` at every ``xi``.

    Harmonics beyond the truncation are left untouched.
    """
    _check_grid(u0, s)
    vecs = bloch_galerkin(u0, s.truncation)
    removed = np.zeros_like(vecs)
    scale = max(1.0, abs(lambdaM))
    for m in range(s.xi_grid.count):
        re = s.eigenvalues[m].real
        near = np.abs(re - lambdaM) < eps_gap
        if near.any():
            warnings.warn(f"marginal count at xi={s.xi[m]:.6g} near Re z = {lambdaM:.6g}",
                          MarginalCountWarning, stacklevel=2)
        above = np.flatnonzero(re > lambdaM + 1e-12 * scale)
        if above.size:
            removed[m] = s.projector(m, above) @ vecs[m]
    return u0 - _from_galerkin(u0, removed, s.truncation)


def prepared_initial_data(op: PeriodicOperator, s: SpectrumSampling, branch, interval,
                          grid=None, real=False, normalize=True) -> SampledFunction:
    """Inverse Bloch transform of a branch's eigenvector field restricted to ``I``.

    ``interval`` is a pair of xi indices ``(start, stop)``; ``branch`` is a
    :class:`Branch` or its id. Phases are aligned between neighbouring ``xi``.
    """
    from .bloch import SpatialGrid

    if isinstance(branch, (int, np.integer)):
        branch = s.branches[int(branch)]
    start, stop = (int(v) for v in interval)
    if not 0 <= start < stop <= s.xi_grid.count:
        raise DomainError(f"interval {interval!r} is empty or outside the xi grid")
    if grid is None:
        grid = SpatialGrid(s.xi_grid.count, max(32, 1 << int(np.ceil(np.log2(2 * s.truncation + 2)))))
    if grid.periods != s.xi_grid.count:
        raise ShapeError("grid periods must equal the xi sample count")
    if branch.flags[start + 1:stop].any():
        warnings.warn(f"branch {branch.id} is crossing-suspect inside the interval",
                      CrossingWarning, stacklevel=2)
    vecs = branch.vectors(s, start, stop)
    for a, b in zip(vecs[:-1], vecs[1:]):
        if abs(np.vdot(a, b)) < 1e-8:
            raise DomainError(f"branch {branch.id} eigenvectors lose continuity inside the interval")
    field_vecs = np.zeros((s.xi_grid.count, s.size), dtype=complex)
    field_vecs[start:stop] = vecs
    f = inverse_bloch(BlochField.from_galerkin(grid, field_vecs, s.truncation, op.components))
    if real:
        f = f.with_values(2 * f.values.real)
    if normalize and f.l2 > 0:
        f = f * (1.0 / f.l2)
    return f
