"""Bloch spectra over a sweep of Floquet exponents.

Eigenvalues of the truncated ``L_xi`` are computed densely at every grid
``xi``, linked into branches by minimal-total-distance matching between
neighbouring ``xi``, and reduced to the spectral bound ``lambda_0``, the
strongly unstable set above ``lambda_0 / p`` and the per-``xi`` eigenvalue
counts needed for the finite-partition check.
"""
from __future__ import annotations

import logging
import warnings as warnings_module
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .bloch import SpatialGrid
from .contour import Contour
from .errors import (ConfigurationError, DomainError, EigensolverError, HypothesisError,
                     MarginalCountWarning)
from .operators import PeriodicOperator, assemble_bloch_matrix

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class XiGrid:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ConfigurationError("xi grid must be a non-empty 1-D array")
        if v[0] != -0.5 or v[-1] >= 0.5:
            raise ConfigurationError("xi grid must start at -1/2 and stay below 1/2")
        if v.size > 1 and not np.allclose(np.diff(v), 1.0 / v.size, rtol=0, atol=1e-14):
            raise ConfigurationError("xi grid must be uniform with spacing 1/count")
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, count):
        if int(count) != count or count < 1:
            raise ConfigurationError(f"xi count must be a positive integer, got {count!r}")
        return cls(-0.5 + np.arange(count) / count)

    @classmethod
    def for_grid(cls, grid: SpatialGrid):
        """The Floquet exponents realized by a periodized box."""
        return cls(grid.xi.copy())

    @property
    def count(self):
        return self.values.size

    @property
    def spacing(self):
        return 1.0 / self.count

    def __len__(self):
        return self.count


@dataclass(eq=False)
class SpectrumSampling:
    """Eigenpairs of the truncated Bloch matrices at every ``xi`` of a grid.

    ``eigenvalues[m, i]`` are sorted by real part (descending) then imaginary
    part; ``eigenvectors[m, :, i]`` is the matching unit-norm right eigenvector
    in Galerkin coordinates.
    """

    operator: PeriodicOperator
    xi_grid: XiGrid
    truncation: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    _inverse: dict = field(default_factory=dict, repr=False)

    @property
    def xi(self):
        return self.xi_grid.values

    @property
    def size(self):
        return self.eigenvalues.shape[1]

    def matrix(self, m):
        return assemble_bloch_matrix(self.operator, float(self.xi[m]), self.truncation)

    def left_vectors(self, m):
        """Rows of ``V^{-1}``: biorthogonal left eigenvectors at ``xi_m``."""
        if m not in self._inverse:
            self._inverse[m] = np.linalg.inv(self.eigenvectors[m])
        return self._inverse[m]

    def eigen_clusters(self, m, rtol=1e-10):
        """Group numerically equal eigenvalues at ``xi_m`` into index lists."""
        lam = self.eigenvalues[m]
        scale = max(1.0, float(np.max(np.abs(lam))))
        clusters, seen = [], np.zeros(lam.size, dtype=bool)
        for i in range(lam.size):
            if seen[i]:
                continue
            members = np.flatnonzero(~seen & (np.abs(lam - lam[i]) <= rtol * scale))
            seen[members] = True
            clusters.append(members)
        return clusters

    def projector(self, m, indices):
        """Spectral projector onto the eigenvectors ``indices`` at ``xi_m``."""
        idx = np.atleast_1d(indices)
        return self.eigenvectors[m][:, idx] @ self.left_vectors(m)[idx, :]

    @cached_property
    def branches(self):
        return track_branches(self)


def _solve_one(op, xi, M):
    B = assemble_bloch_matrix(op, xi, M)
    try:
        if B.is_diagonal:
            vals = np.diag(B.entries).copy()
            vecs = np.eye(B.entries.shape[0], dtype=complex)
        else:
            vals, vecs = scipy.linalg.eig(B.entries)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(xi, exc) from exc
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vecs))):
        raise EigensolverError(xi, "non-finite eigenpairs")
    order = np.lexsort((vals.imag, -vals.real))
    vecs = vecs[:, order]
    vecs /= np.linalg.norm(vecs, axis=0)
    return vals[order], vecs


def bloch_spectrum(op: PeriodicOperator, grid: XiGrid, M: int, jobs=1) -> SpectrumSampling:
    if M < op.bandwidth:
        raise ConfigurationError(f"truncation M={M} is below the coefficient bandwidth {op.bandwidth}")
    xis = [float(x) for x in grid.values]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(lambda x: _solve_one(op, x, M), xis))
    else:
        results = [_solve_one(op, x, M) for x in xis]
    vals = np.array([r[0] for r in results])
    vecs = np.array([r[1] for r in results])
    return SpectrumSampling(op, grid, M, vals, vecs)


@dataclass(eq=False)
class Branch:
    """One continuous eigenvalue curve ``lambda(xi_m)``.

    ``indices[m]`` locates the branch inside the sorted eigenvalue list at
    ``xi_m``; ``flags[m]`` marks a suspicious jump from ``xi_{m-1}``.
    """

    id: int
    indices: np.ndarray
    values: np.ndarray
    flags: np.ndarray

    @property
    def crossing_suspect(self):
        return bool(self.flags.any())

    def vectors(self, sampling: SpectrumSampling, start=0, stop=None):
        """Eigenvectors over ``xi_start..xi_stop-1`` with neighbour-aligned phases."""
        stop = len(self.indices) if stop is None else stop
        out = []
        for m in range(start, stop):
            v = sampling.eigenvectors[m][:, self.indices[m]].copy()
            if out:
                overlap = np.vdot(out[-1], v)
                if abs(overlap) > 0:
                    v *= np.conj(overlap) / abs(overlap)
            out.append(v)
        return np.array(out)


def _nearest_gap(lam):
    """Median distance to the nearest distinct eigenvalue (exact ties ignored)."""
    if lam.size < 2:
        return np.inf
    d = np.abs(lam[:, None] - lam[None, :])
    scale = max(1.0, float(np.max(np.abs(lam))))
    d[d <= 1e-10 * scale] = np.inf
    nearest = d.min(axis=1)
    nearest = nearest[np.isfinite(nearest)]
    return float(np.median(nearest)) if nearest.size else np.inf


def track_branches(s: SpectrumSampling, tau=None, factor=10.0):
    """Link eigenvalues across neighbouring ``xi`` by minimal total distance.

    Branch ``b`` starts at the ``b``-th sorted eigenvalue of the first ``xi``.
    A step is flagged crossing-suspect when it exceeds ``tau`` (default:
    ``factor`` times the median nearest-neighbour gap at the previous ``xi``).
    """
    n_xi, n = s.eigenvalues.shape
    if n_xi < 16:
        raise DomainError(f"branch tracking needs at least 16 xi samples, got {n_xi}")
    idx = np.zeros((n_xi, n), dtype=int)
    flags = np.zeros((n_xi, n), dtype=bool)
    idx[0] = np.arange(n)
    for m in range(1, n_xi):
        prev = s.eigenvalues[m - 1][idx[m - 1]]
        cur = s.eigenvalues[m]
        cost = np.abs(prev[:, None] - cur[None, :])
        rows, cols = linear_sum_assignment(cost)
        idx[m, rows] = cols
        limit = tau if tau is not None else factor * _nearest_gap(s.eigenvalues[m - 1])
        flags[m] = np.abs(cur[idx[m]] - prev) > limit
    branches = []
    for b in range(n):
        ind = idx[:, b]
        branches.append(Branch(b, ind, s.eigenvalues[np.arange(n_xi), ind], flags[:, b]))
    return branches


def branch_of(s: SpectrumSampling, m, index):
    for br in s.branches:
        if br.indices[m] == index:
            return br
    raise KeyError((m, index))


@dataclass(frozen=True)
class SpectralMax:
    value: float
    xi: float
    xi_index: int
    eig_index: int
    branch_id: int


def lambda0(s: SpectrumSampling) -> SpectralMax:
    """Largest sampled real part, with where it is attained."""
    re = s.eigenvalues.real
    m, i = np.unravel_index(int(np.argmax(re)), re.shape)
    bid = branch_of(s, m, i).id if s.xi_grid.count >= 16 else -1
    return SpectralMax(float(re[m, i]), float(s.xi[m]), int(m), int(i), bid)


@dataclass(frozen=True)
class Segment:
    """A run ``start <= m < stop`` of one branch above the instability threshold."""

    branch_id: int
    start: int
    stop: int
    xi_lo: float
    xi_hi: float
    max_re: float


@dataclass(frozen=True)
class UnstableSet:
    lambda0: float
    p: float
    members: tuple

    @property
    def threshold(self):
        return self.lambda0 / self.p

    @property
    def is_empty(self):
        return not self.members


def _runs(mask):
    """Maximal ``[start, stop)`` runs of True."""
    runs, start = [], None
    for m, flag in enumerate(mask):
        if flag and start is None:
            start = m
        elif not flag and start is not None:
            runs.append((start, m))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


def unstable_set(s: SpectrumSampling, p: float) -> UnstableSet:
    if not p > 1:
        raise ConfigurationError(f"p must exceed 1, got {p!r}")
    lam0 = lambda0(s).value
    thr = lam0 / p
    h = s.xi_grid.spacing
    members = []
    for br in s.branches:
        for a, b in _runs(br.values.real > thr):
            members.append(Segment(br.id, a, b, float(s.xi[a]), float(s.xi[b - 1] + h),
                                   float(br.values.real[a:b].max())))
    return UnstableSet(lam0, float(p), tuple(members))


@dataclass(frozen=True)
class Interval:
    start: int
    stop: int
    xi_lo: float
    xi_hi: float
    count: int
    marginal_xi: tuple = ()


@dataclass(frozen=True)
class HypothesisPartition:
    lambda_m: float
    threshold: float
    counts: np.ndarray
    intervals: tuple
    contour: Contour | None
    warnings: tuple = ()

    @property
    def description(self):
        return (f"eigenvalues with Re z > {self.lambda_m:.6g} "
                f"(strongly unstable set above Re z = {self.threshold:.6g})")


def hypothesis_partition(s: SpectrumSampling, lambdaM: float, p: float = 2.0,
                         eps_gap: float = 1e-6, n_nodes: int = 128) -> HypothesisPartition:
    """Count eigenvalues above ``lambdaM`` at each ``xi`` and merge constant runs."""
    lam0 = lambda0(s).value
    thr = lam0 / p
    if not lambdaM > thr:
        raise HypothesisError(f"lambda_M={lambdaM:.6g} does not exceed lambda_0/p={thr:.6g}")
    re = s.eigenvalues.real
    counts = np.sum(re > lambdaM, axis=1)
    marginal = np.any(np.abs(re - lambdaM) < eps_gap, axis=1)
    h = s.xi_grid.spacing
    intervals, notes = [], []
    start = 0
    for m in range(1, s.xi_grid.count + 1):
        if m == s.xi_grid.count or counts[m] != counts[start]:
            flagged = tuple(float(s.xi[k]) for k in range(start, m) if marginal[k])
            intervals.append(Interval(start, m, float(s.xi[start]), float(s.xi[m - 1] + h),
                                      int(counts[start]), flagged))
            start = m
    for k in np.flatnonzero(marginal):
        notes.append(f"marginal count at xi={s.xi[k]:.6g}: eigenvalue within "
                     f"{eps_gap:g} of Re z = {lambdaM:.6g}")
        warnings_module.warn(notes[-1], MarginalCountWarning, stacklevel=2)
    above = s.eigenvalues[re > lambdaM]
    contour = None
    if above.size:
        pad = max(eps_gap, 1e-3 * max(1.0, float(np.ptp(above.real)), float(np.ptp(above.imag))))
        contour = Contour.rectangle(complex(lambdaM, above.imag.min() - pad),
                                    complex(above.real.max() + pad, above.imag.max() + pad),
                                    n_nodes)
    return HypothesisPartition(float(lambdaM), float(thr), counts, tuple(intervals),
                               contour, tuple(notes))


def spectrum_rows(s: SpectrumSampling):
    """CSV rows ``(xi, branch_id, re_lambda, im_lambda, crossing_flag)``."""
    rows = []
    for m, xi in enumerate(s.xi):
        for br in s.branches:
            lam = br.values[m]
            rows.append((float(xi), br.id, float(lam.real), float(lam.imag), int(br.flags[m])))
    return rows
