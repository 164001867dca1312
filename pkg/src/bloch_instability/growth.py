"""Growth-rate fits, instability verdicts, rho series and the polynomial bounds."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bloch import SampledFunction
from .errors import (ConfigurationError, DampingFailure, DiagnosticsError, EtaTooLargeError,
                     HypothesisError)
from .evolution import (BlochPropagator, Trajectory, _box_l2, linear_evolve,
                        linear_trajectory, nonlinear_evolve)
from .operators import Nonlinearity, PeriodicOperator
from .projections import ProjectionReport, _cluster_of


def fit_rate(times, norms):
    """Least-squares slope of ``log norms`` against ``times``."""
    times, norms = np.asarray(times, float), np.asarray(norms, float)
    if times.size < 10:
        raise DiagnosticsError(f"fit window holds {times.size} samples; need at least 10")
    if np.any(norms <= 0):
        raise DiagnosticsError("cannot fit a rate to a vanishing norm series")
    slope, _ = np.polyfit(times, np.log(norms), 1)
    return float(slope)


@dataclass(eq=False)
class GrowthDiagnostics:
    omega: float
    lambda_m: float
    r: float
    R: float
    window: tuple
    C_lower: float
    C_upper: float
    tol: float
    times: np.ndarray
    norm_full: np.ndarray
    norm_projected: np.ndarray
    overflow: bool
    projector_norm_sup: float

    @property
    def lower_ok(self):
        return self.omega - self.tol <= self.r

    @property
    def upper_ok(self):
        return self.R <= self.lambda_m + self.tol

    @property
    def holds(self):
        return self.lower_ok and self.upper_ok

    def to_dict(self):
        return {"omega": self.omega, "lambda_m": self.lambda_m, "r": self.r, "R": self.R,
                "window": list(self.window), "C_lower": self.C_lower, "C_upper": self.C_upper,
                "tol": self.tol, "lower_ok": self.lower_ok, "upper_ok": self.upper_ok,
                "holds": self.holds, "overflow": self.overflow,
                "projector_norm_sup": self.projector_norm_sup}

    def rows(self):
        return [(float(t), float(a), float(b))
                for t, a, b in zip(self.times, self.norm_full, self.norm_projected)]


def _projected_norm(prop, report, F):
    s = report.sampling
    vecs = prop.gather(F)
    total = 0.0
    for m, i in zip(range(report.start, report.stop), report.indices):
        total += np.sum(np.abs(s.projector(m, _cluster_of(s, m, i)) @ vecs[m]) ** 2)
    return float(np.sqrt(prop.grid.length * total))


def fit_growth_sandwich(op: PeriodicOperator, u0: SampledFunction, report: ProjectionReport,
                        omega: float, horizon: float, n_samples: int = 200, delta: float = 1.0,
                        window=(0.25, 1.0), tol: float = 0.01) -> GrowthDiagnostics:
    """Fit ``r`` (projected) and ``R`` (full) growth rates of ``e^{Lt} delta u0``.

    ``window`` is a pair of fractions of the pre-overflow time span.
    """
    if report.start is None:
        raise DiagnosticsError("report has no activating branch to project on")
    if not omega < report.lambda_m:
        raise ConfigurationError(f"omega={omega:g} must be below lambda_M={report.lambda_m:g}")
    prop = BlochPropagator(op, u0.grid, report.sampling.truncation)
    times, states = linear_trajectory(op, u0 * delta, horizon, n_samples, propagator=prop)
    full = np.array([_box_l2(u0.grid, F) for F in states])
    proj = np.array([_projected_norm(prop, report, F) for F in states])
    overflow = times.size < n_samples + 1
    t_max = times[-1]
    sel = (times >= window[0] * t_max) & (times <= window[1] * t_max)
    r = fit_rate(times[sel], proj[sel])
    R = fit_rate(times[sel], full[sel])
    c_lo = float(np.min(proj[sel] / (delta * np.exp(omega * times[sel]))))
    c_hi = float(np.max(full / (delta * np.exp(report.lambda_m * times))))
    return GrowthDiagnostics(float(omega), report.lambda_m, r, R,
                             (float(times[sel][0]), float(times[sel][-1])), c_lo, c_hi, tol,
                             times, full, proj, overflow, report.projector_norm_sup)


def instability_time(eta, delta, lambdaM):
    """``T`` with ``exp(lambda_M T) = 2 eta / delta``."""
    if not lambdaM > 0:
        raise HypothesisError(f"instability time needs lambda_M > 0, got {lambdaM:g}")
    if not 2 * eta > delta > 0:
        raise ConfigurationError(f"need 0 < delta < 2 eta, got delta={delta:g}, eta={eta:g}")
    return float(np.log(2 * eta / delta) / lambdaM)


def rho_series(traj: Trajectory, lambdaM: float, space: str = "L2"):
    """Running sup of ``||u(s)|| exp(-lambda_M s)``."""
    return np.maximum.accumulate(traj.norm(space) * np.exp(-lambdaM * traj.times))


@dataclass(frozen=True)
class PolynomialBound:
    p: float
    eta: float
    lambda_m: float
    lambda0: float
    C: float
    C_N: float
    z_star: float
    g_star: float
    root: float | None

    @property
    def has_root(self):
        return self.root is not None

    def g(self, z):
        k = self.C_N * (2 * self.eta) ** (self.p - 1) / (self.p * self.lambda_m - self.lambda0)
        return self.C - z + k * np.asarray(z, dtype=float) ** self.p

    def to_dict(self):
        return {"z_star": self.z_star, "g_star": self.g_star, "root": self.root,
                "status": "root" if self.has_root else "eta_too_large", "C": self.C,
                "C_N": self.C_N}


def polynomial_bound(p, eta, lambdaM, lambda0, C, C_N=1.0) -> PolynomialBound:
    """``g(z) = C - z + C_N (2 eta)^(p-1) / (p lambda_M - lambda_0) z^p``: critical point and root."""
    gap = p * lambdaM - lambda0
    if not gap > 0:
        raise HypothesisError(f"p*lambda_M - lambda_0 = {gap:g} must be positive")
    if not (p > 1 and eta > 0 and C > 0 and C_N > 0):
        raise ConfigurationError("polynomial bound needs p > 1 and positive eta, C, C_N")
    z_star = (gap / (p * C_N)) ** (1 / (p - 1)) / (2 * eta)
    k = C_N * (2 * eta) ** (p - 1) / gap
    g = lambda z: C - z + k * z ** p
    g_star = float(g(z_star))
    root = float(brentq(g, 0.0, z_star, xtol=1e-15, rtol=4 * np.finfo(float).eps)) if g_star < 0 else None
    return PolynomialBound(float(p), float(eta), float(lambdaM), float(lambda0), float(C),
                           float(C_N), float(z_star), g_star, root)


@dataclass(frozen=True)
class DissipativeBound:
    L: float
    h_at_L: float
    comparison: float
    certified: bool
    root: float | None

    def to_dict(self):
        return {"L": self.L, "h_at_L": self.h_at_L, "comparison": self.comparison,
                "certified": self.certified, "root": self.root}


def dissipative_bound(p, eta, delta, a_p, a_pm1, C) -> DissipativeBound:
    """Root of ``h(z) = a_p eta^(p-1) z^p + a_(p-1) eta^(p-2) delta z^(p-1) - z + C`` on ``[0, C+1]``."""
    if min(a_p, a_pm1, C, eta) <= 0 or delta < 0:
        raise ConfigurationError("dissipative bound needs positive constants")

    def h(z):
        return a_p * eta ** (p - 1) * z ** p + a_pm1 * eta ** (p - 2) * delta * z ** (p - 1) - z + C

    L = C + 1.0
    comparison = a_p * eta ** (p - 1) * L ** p + a_pm1 * eta ** (p - 2) * delta * L ** (p - 1)
    hL = float(h(L))
    root = float(brentq(h, 0.0, L, xtol=1e-15)) if hL < 0 else None
    return DissipativeBound(L, hL, float(comparison), bool(comparison < 1), root)


def dissipative_coefficients(C, p, lambda0, lambdaM, theta, initial_norm):
    """``(a_{p-1}, a_p)`` of the dissipative rho inequality."""
    g1 = (p - 1) * lambdaM - (theta + lambda0)
    g2 = p * lambdaM - lambda0
    if not (g1 > 0 and g2 > 0):
        raise HypothesisError(
            f"need (p-1) lambda_M > theta + lambda_0 and p lambda_M > lambda_0; "
            f"got {g1:g} and {g2:g}")
    a_pm1 = initial_norm / g1
    a_p = C / (theta + lambdaM) * (1 / g2 + 1 / g1)
    return float(a_pm1), float(a_p)


def dissipative_rates_ok(p, lambda0, lambdaM, theta):
    """Both rate conditions required for the dissipative instability statement."""
    return (lambda0 + theta) / (p - 1) < lambdaM and lambda0 / p < lambdaM


@dataclass(frozen=True)
class DampingFit:
    C: float
    residual: float
    theta: float

    def to_dict(self):
        return {"C": self.C, "residual": self.residual, "theta": self.theta}


def damping_integral(times, h1, theta):
    """``I(t_k) = int_0^{t_k} exp(-theta (t_k - s)) ||u(s)||_H1 ds`` by the trapezoid rule."""
    out = np.zeros_like(times, dtype=float)
    for k in range(1, times.size):
        dt = times[k] - times[k - 1]
        decay = np.exp(-theta * dt)
        out[k] = decay * out[k - 1] + dt / 2 * (decay * h1[k - 1] + h1[k])
    return out


def damping_check(traj: Trajectory, theta: float, cap: float = 1e6) -> DampingFit:
    """Smallest ``C`` with ``||u||_H2 <= e^{-theta t}||u0||_H2 + C I(t)`` at every sample."""
    if not theta > 0:
        raise ConfigurationError(f"theta must be positive, got {theta!r}")
    t, h1, h2 = traj.times, traj.h1, traj.h2
    excess = h2 - np.exp(-theta * t) * h2[0]
    integral = damping_integral(t, h1, theta)
    pos = integral > 0
    if np.any(excess[~pos] > 0):
        raise DampingFailure("H2 norm grows where the H1 integral vanishes: no finite C")
    C = float(max(0.0, np.max(excess[pos] / integral[pos]))) if pos.any() else 0.0
    if C > cap:
        raise DampingFailure(f"damping constant {C:.3g} exceeds the cap {cap:g}")
    residual = float(max(0.0, np.max(excess - C * integral)))
    return DampingFit(C, residual, float(theta))


@dataclass(eq=False)
class RunRecord:
    delta: float
    T: float
    norm_at_T: float
    linear_norm_at_T: float
    deviation: float
    rho_max: float
    nonlinear_constant: float
    bound: PolynomialBound | None
    trajectory: Trajectory = field(repr=False, default=None)
    passed: bool = False

    @property
    def rho_ok(self):
        if self.bound is None:
            return None
        if self.bound.root is None:
            return False
        return self.rho_max <= 1.05 * self.delta * self.bound.root

    def to_dict(self):
        return {"delta": self.delta, "T": self.T, "norm_at_T": self.norm_at_T,
                "linear_norm_at_T": self.linear_norm_at_T, "deviation": self.deviation,
                "rho_max": self.rho_max, "nonlinear_constant": self.nonlinear_constant,
                "rho_bound": None if self.bound is None else self.bound.to_dict(),
                "rho_ok": self.rho_ok, "pass": self.passed,
                "overflow": bool(self.trajectory.overflow) if self.trajectory else None}


@dataclass(eq=False)
class InstabilityVerdict:
    status: str
    eta: float
    deltas: list
    lambda_m: float
    lambda0: float
    p: float
    C_lower: float | None = None
    C_upper: float | None = None
    C_linear: float | None = None
    epsilon: float | None = None
    runs: list = field(default_factory=list)

    @property
    def times(self):
        return [r.T for r in self.runs]

    @property
    def unstable(self):
        return self.status == "completed" and all(r.passed for r in self.runs)

    @property
    def spread(self):
        vals = [r.norm_at_T for r in self.runs]
        return max(vals) / min(vals) if vals and min(vals) > 0 else np.inf

    def to_dict(self):
        return {"status": self.status, "eta": self.eta, "deltas": list(self.deltas),
                "lambda_m": self.lambda_m, "lambda0": self.lambda0, "p": self.p,
                "C_lower": self.C_lower, "C_upper": self.C_upper, "C_linear": self.C_linear,
                "epsilon": self.epsilon, "unstable": self.unstable, "spread": self.spread,
                "runs": [r.to_dict() for r in self.runs]}


def instability_experiment(op: PeriodicOperator, nonlin: Nonlinearity, u0: SampledFunction,
                           eta: float, deltas, report: ProjectionReport, dt: float,
                           n_linear: int = 400, snapshot_stride: int = 50,
                           refine: bool = False) -> InstabilityVerdict:
    """Run ``u_delta`` to ``T(delta)`` for each delta and compare against ``epsilon``.

    ``C_lower = 2 inf_t ||e^{Lt}u0|| e^{-lambda_M t}`` so that the linear part at
    ``T`` is at least ``C_lower * eta``; ``C_upper`` is the largest measured
    ``||u_delta(T) - e^{LT} delta u0|| / eta^p``.
    """
    deltas = [float(d) for d in deltas]
    lam_m, lam0, p = report.lambda_m, report.lambda0, nonlin.p
    if not report.activated or not lam_m > lam0 / p:
        return InstabilityVerdict("hypotheses_unmet", eta, deltas, lam_m, lam0, p)
    Ts = [instability_time(eta, d, lam_m) for d in deltas]
    prop = BlochPropagator(op, u0.grid, report.sampling.truncation)
    times, states = linear_trajectory(op, u0, max(Ts), n_linear, propagator=prop)
    if times[-1] < max(Ts):
        raise ConfigurationError("linear flow of u0 overflows before the largest T")
    scaled = np.array([_box_l2(u0.grid, F) for F in states]) * np.exp(-lam_m * times)
    c_inf, c_sup = float(scaled.min()), float(scaled.max())
    runs = []
    for d, T in zip(deltas, Ts):
        traj = nonlinear_evolve(op, nonlin, u0, d, T, dt, snapshot_stride=snapshot_stride,
                                M=report.sampling.truncation, refine=refine)
        if traj.overflow:
            raise ConfigurationError(f"nonlinear run overflowed before T={T:g} (delta={d:g})")
        final = traj.final
        lin = linear_evolve(op, u0 * d, T, propagator=prop)
        dev = float((final - lin).l2)
        rho = rho_series(traj, lam_m)
        ratio = traj.nonlinear_ratio
        c_n = float(np.max(ratio)) if ratio is not None else np.nan
        bound = None
        if nonlin.kind == "power" and c_n > 0:
            bound = polynomial_bound(p, eta, lam_m, lam0, c_sup, c_n)
        runs.append(RunRecord(d, T, float(final.l2), float(lin.l2), dev, float(rho[-1]),
                              c_n, bound, traj))
    C_lower = 2 * c_inf
    C_upper = max(r.deviation for r in runs) / eta ** p
    eps = C_lower * eta - C_upper * eta ** p
    if eps <= 0:
        raise EtaTooLargeError(
            f"epsilon = {C_lower:.4g}*eta - {C_upper:.4g}*eta^{p:g} = {eps:.4g} <= 0; "
            f"choose a smaller eta than {eta:g}")
    for r in runs:
        r.passed = r.norm_at_T >= eps
    return InstabilityVerdict("completed", float(eta), deltas, lam_m, lam0, p, C_lower, C_upper,
                              c_sup, float(eps), runs)
