"""Linear and nonlinear time evolution on the periodized box.

The linear flow is applied per Floquet exponent: box Fourier coefficients are
re-indexed into Galerkin vectors, multiplied by ``expm(t L_xi)`` and written
back. Nonlinear runs use ETDRK4 for scalar constant-coefficient operators and
Strang splitting (Bloch exponential / RK4 nonlinear stage) otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .bloch import SampledFunction, SpatialGrid
from .errors import (ConfigurationError, DomainError, GrowthOverflowError,
                     ResolutionError, UnsupportedOracleError)
from .operators import Nonlinearity, PeriodicOperator, assemble_bloch_matrix

OVERFLOW = 1e12


def default_truncation(grid: SpatialGrid):
    return grid.points_per_period // 2 - 1


class BlochPropagator:
    """``exp(t L_xi)`` for every box Floquet exponent, acting on box Fourier arrays."""

    def __init__(self, op: PeriodicOperator, grid: SpatialGrid, M: int | None = None):
        M = default_truncation(grid) if M is None else M
        if not op.bandwidth <= M <= default_truncation(grid):
            raise ConfigurationError(
                f"truncation M={M} must lie in [{op.bandwidth}, {default_truncation(grid)}]")
        self.op, self.grid, self.M = op, grid, M
        ks = range(-M, M + 1)
        self.slots = np.array([[grid.slot_of(m, k) for k in ks] for m in range(grid.periods)])
        self.matrices = [assemble_bloch_matrix(op, float(xi), M) for xi in grid.xi]
        covered = np.zeros(grid.n_points, dtype=bool)
        covered[self.slots.ravel()] = True
        self.uncovered = ~covered
        self._cache = {}

    @property
    def components(self):
        return self.op.components

    def gather(self, F):
        """Box coefficients ``(d, N)`` to Galerkin vectors ``(N_per, d(2M+1))``."""
        return np.transpose(F[:, self.slots], (1, 0, 2)).reshape(self.grid.periods, -1)

    def scatter(self, vecs):
        d, width = self.components, 2 * self.M + 1
        F = np.zeros((d, self.grid.n_points), dtype=complex)
        F[:, self.slots] = np.transpose(vecs.reshape(self.grid.periods, d, width), (1, 0, 2))
        return F

    def exponentials(self, t):
        key = float(t)
        if key not in self._cache:
            mats = []
            for B in self.matrices:
                if B.is_diagonal:
                    mats.append(np.diag(np.exp(t * np.diag(B.entries))))
                else:
                    mats.append(scipy.linalg.expm(t * B.entries))
            self._cache[key] = np.array(mats)
        return self._cache[key]

    def apply(self, F, t):
        vecs = self.gather(F)
        return self.scatter(np.einsum("mij,mj->mi", self.exponentials(t), vecs))

    def dropped_fraction(self, F):
        total = np.sum(np.abs(F) ** 2)
        return 0.0 if total == 0 else float(np.sqrt(np.sum(np.abs(F[:, self.uncovered]) ** 2) / total))


def _box_l2(grid, F):
    return float(np.sqrt(grid.length * np.sum(np.abs(F) ** 2)))


def linear_evolve(op: PeriodicOperator, u0: SampledFunction, t: float, M: int | None = None,
                  overflow=OVERFLOW, propagator: BlochPropagator | None = None) -> SampledFunction:
    """``e^{Lt} u0`` through the Bloch decomposition."""
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t!r}")
    if t == 0:
        return u0.with_values(u0.values.copy())
    prop = propagator or BlochPropagator(op, u0.grid, M)
    F = u0.fourier
    if prop.dropped_fraction(F) > 1e-10:
        raise ResolutionError("u0 carries Bloch harmonics beyond the truncation M")
    out = prop.apply(F, t)
    if _box_l2(u0.grid, out) > overflow:
        raise GrowthOverflowError(f"||e^(Lt) u0|| exceeds {overflow:g} at t={t:g}")
    return SampledFunction(u0.grid, np.fft.ifft(out, axis=-1) * u0.grid.n_points)


def dense_box_generator(op: PeriodicOperator, grid: SpatialGrid):
    """Collocation matrix of ``L`` on the whole box (small grids only)."""
    n, d = grid.n_points, op.components
    if n * d > 2048:
        raise UnsupportedOracleError(f"dense box oracle limited to 2048 unknowns, got {n * d}")
    eye = np.eye(n)
    fwd = np.fft.fft(eye, axis=0)
    kappa = grid.wavenumbers
    nyq = np.abs(kappa) == grid.points_per_period / 2
    A = np.zeros((d * n, d * n), dtype=complex)
    for j, coeff in op.terms.items():
        mult = (1j * kappa) ** j
        if j % 2:
            mult = np.where(nyq, 0, mult)
        D = np.fft.ifft(mult[:, None] * fwd, axis=0)
        a = coeff.evaluate(grid.x)
        for r in range(d):
            for c in range(d):
                A[r * n:(r + 1) * n, c * n:(c + 1) * n] += a[r, c][:, None] * D
    return A


def dense_box_evolve(op: PeriodicOperator, u0: SampledFunction, t: float) -> SampledFunction:
    """Whole-box oracle ``expm(t A) u0`` with the collocation generator ``A``."""
    A = dense_box_generator(op, u0.grid)
    out = scipy.linalg.expm(t * A) @ u0.values.reshape(-1)
    return u0.with_values(out.reshape(u0.components, -1))


def box_symbol(op: PeriodicOperator, grid: SpatialGrid):
    """Scalar constant-coefficient symbol on the box wavenumbers (odd orders vanish at Nyquist)."""
    if not op.is_constant or op.components != 1:
        raise UnsupportedOracleError("box symbol needs a scalar constant-coefficient operator")
    kappa = grid.wavenumbers
    nyq = np.abs(kappa) == grid.points_per_period / 2
    total = np.zeros(grid.n_points, dtype=complex)
    for j, coeff in op.terms.items():
        mult = (1j * kappa) ** j
        if j % 2:
            mult = np.where(nyq, 0, mult)
        total += complex(coeff.mode(0)[0, 0]) * mult
    return total


def etdrk4_coefficients(L, h, n_contour=64):
    """ETDRK4 weights with phi-functions averaged on a unit circle around ``h L``."""
    r = np.exp(2j * np.pi * (np.arange(1, n_contour + 1) - 0.5) / n_contour)
    LR = h * L[:, None] + r[None, :]
    Q = h * np.mean((np.exp(LR / 2) - 1) / LR, axis=1)
    f1 = h * np.mean((-4 - LR + np.exp(LR) * (4 - 3 * LR + LR ** 2)) / LR ** 3, axis=1)
    f2 = h * np.mean((2 + LR + np.exp(LR) * (-2 + LR)) / LR ** 3, axis=1)
    f3 = h * np.mean((-4 - 3 * LR - LR ** 2 + np.exp(LR) * (4 - LR)) / LR ** 3, axis=1)
    return np.exp(h * L), np.exp(h * L / 2), Q, f1, f2, f3


@dataclass(eq=False)
class Trajectory:
    """Norm series at every step plus decimated state snapshots."""

    grid: SpatialGrid
    times: np.ndarray
    l2: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    snapshot_times: np.ndarray
    states: list
    dt: float
    method: str
    overflow: bool = False
    nonlinear_ratio: np.ndarray | None = None
    stability: dict = field(default_factory=dict)

    def norm(self, space="L2"):
        return {"L2": self.l2, "H1": self.h1, "H2": self.h2}[space.upper()]

    @property
    def final(self):
        return self.states[-1]

    @property
    def t_end(self):
        return float(self.times[-1])

    def rows(self, rho=None):
        """CSV rows ``(t, l2, h1, h2, rho)``."""
        rho = np.full(self.times.size, np.nan) if rho is None else rho
        return [tuple(float(v) for v in row)
                for row in zip(self.times, self.l2, self.h1, self.h2, rho)]


def _sobolev(grid, F):
    k2 = grid.wavenumbers ** 2
    power = np.sum(np.abs(F) ** 2, axis=0) * grid.length
    return (np.sqrt(np.sum(power)), np.sqrt(np.sum(power * (1 + k2))),
            np.sqrt(np.sum(power * (1 + k2 + k2 ** 2))))


class _Recorder:
    def __init__(self, grid, nonlin, stride, power_ratio):
        self.grid, self.nonlin, self.stride = grid, nonlin, stride
        self.power_ratio = power_ratio
        self.t, self.norms, self.snap_t, self.states, self.ratio = [], [], [], [], []

    def record(self, step, t, F, force=False):
        self.t.append(t)
        self.norms.append(_sobolev(self.grid, F))
        if self.power_ratio:
            l2 = self.norms[-1][0]
            nf = self.nonlin.fourier(self.grid, F, dealias=True)
            self.ratio.append(_box_l2(self.grid, nf) / l2 ** self.nonlin.p if l2 > 0 else 0.0)
        if step % self.stride == 0 or force:
            self.snap_t.append(t)
            self.states.append(SampledFunction(self.grid, np.fft.ifft(F, axis=-1) * self.grid.n_points))

    def trajectory(self, dt, method, overflow, stability):
        n = np.array(self.norms)
        return Trajectory(self.grid, np.array(self.t), n[:, 0], n[:, 1], n[:, 2],
                          np.array(self.snap_t), self.states, dt, method, overflow,
                          np.array(self.ratio) if self.power_ratio else None, stability)


def _rk4(f, F, h):
    k1 = f(F)
    k2 = f(F + h / 2 * k1)
    k3 = f(F + h / 2 * k2)
    k4 = f(F + h * k3)
    return F + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _run(op, nonlin, u0, delta, t_end, dt, stride, M, method, overflow, track_ratio):
    grid = u0.grid
    n_steps = max(1, int(np.ceil(t_end / dt - 1e-9)))
    h = t_end / n_steps
    N = lambda F: nonlin.fourier(grid, F, dealias=True)
    F = delta * u0.fourier
    rec = _Recorder(grid, nonlin, stride, track_ratio)
    rec.record(0, 0.0, F)
    stability = {"dt": h, "steps": n_steps}
    if method == "etdrk4":
        L = box_symbol(op, grid)[None, :]
        E, E2, Q, f1, f2, f3 = (c[None, :] for c in etdrk4_coefficients(L[0], h))
        stability["max_abs_hL"] = float(np.max(np.abs(h * L)))

        def step(F):
            Nv = N(F)
            a = E2 * F + Q * Nv
            Na = N(a)
            b = E2 * F + Q * Na
            Nb = N(b)
            c = E2 * a + Q * (2 * Nb - Nv)
            return E * F + f1 * Nv + 2 * f2 * (Na + Nb) + f3 * N(c)
    else:
        prop = BlochPropagator(op, grid, M)
        F = F * ~prop.uncovered
        stability["max_abs_hL"] = float(max(np.max(np.abs(np.linalg.eigvals(B.entries)))
                                            for B in prop.matrices) * h)
        half = prop.exponentials(h / 2)

        def lin(F):
            vecs = prop.gather(F)
            return prop.scatter(np.einsum("mij,mj->mi", half, vecs))

        def step(F):
            F = lin(F)
            if nonlin.kind != "none":
                F = _rk4(N, F, h) * ~prop.uncovered
            return lin(F)

    blew = False
    for k in range(1, n_steps + 1):
        F = step(F)
        if not np.all(np.isfinite(F)):
            if _box_l2(grid, np.nan_to_num(F)) > overflow or np.any(np.isinf(F)):
                blew = True
                break
            raise FloatingPointError(f"NaN in the state at t={k * h:g}")
        t = k * h if k < n_steps else float(t_end)
        if _box_l2(grid, F) > overflow:
            rec.record(k, t, F, force=True)
            blew = True
            break
        rec.record(k, t, F, force=(k == n_steps))
    return rec.trajectory(h, method, blew, stability)


def nonlinear_evolve(op: PeriodicOperator, nonlin: Nonlinearity, u0: SampledFunction,
                     delta: float, t_end: float, dt: float, snapshot_stride: int = 1,
                     M: int | None = None, method: str = "auto", refine: bool = False,
                     refine_tol: float = 1e-6, max_halvings: int = 6,
                     overflow: float = OVERFLOW) -> Trajectory:
    """Trajectory of ``u_t = L u + N(u)`` from ``delta * u0`` up to ``t_end``.

    ``refine`` halves ``dt`` until the final state changes by less than
    ``refine_tol`` (relative L2) between successive runs.
    """
    if t_end <= 0 or dt <= 0:
        raise DomainError("t_end and dt must be positive")
    if snapshot_stride < 1:
        raise ConfigurationError("snapshot_stride must be >= 1")
    if method == "auto":
        method = "etdrk4" if op.is_constant and op.components == 1 else "splitting"
    if method not in ("etdrk4", "splitting"):
        raise ConfigurationError(f"unknown integrator {method!r}")
    if method == "etdrk4":
        box_symbol(op, u0.grid)
    track = nonlin.kind == "power"
    traj = _run(op, nonlin, u0, delta, t_end, dt, snapshot_stride, M, method, overflow, track)
    if not refine:
        return traj
    history = [traj.dt]
    for _ in range(max_halvings):
        stride = snapshot_stride * 2
        finer = _run(op, nonlin, u0, delta, t_end, traj.dt / 2, stride, M, method, overflow, track)
        history.append(finer.dt)
        a, b = traj.final.values, finer.final.values
        change = np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)
        traj, snapshot_stride = finer, stride
        if change < refine_tol:
            break
    traj.stability["dt_history"] = history
    traj.stability["refine_change"] = float(change)
    return traj


def linear_trajectory(op: PeriodicOperator, u0: SampledFunction, t_end: float, n_steps: int,
                      M: int | None = None, overflow: float = OVERFLOW,
                      propagator: BlochPropagator | None = None):
    """Box Fourier states ``e^{L t_k} u0`` at ``t_k = k t_end / n_steps`` (stops before overflow).

    Returns ``(times, fourier_states)``.
    """
    prop = propagator or BlochPropagator(op, u0.grid, M)
    h = t_end / n_steps
    E = prop.exponentials(h)
    vecs = prop.gather(u0.fourier)
    times, states = [0.0], [prop.scatter(vecs)]
    for k in range(1, n_steps + 1):
        vecs = np.einsum("mij,mj->mi", E, vecs)
        F = prop.scatter(vecs)
        if _box_l2(u0.grid, F) > overflow:
            break
        times.append(k * h)
        states.append(F)
    return np.array(times), states
