"""Periodic-coefficient differential operators and their Bloch matrices.

An operator ``L = sum_j a_j(x) d_x^j`` is stored as finitely many Fourier
modes of each coefficient, so the Fourier-Galerkin truncation of the Bloch
operator ``L_xi = sum_j a_j(x) (d_x + i xi)^j`` is exact and banded.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bloch import SampledFunction
from .errors import (ConfigurationError, DomainError, ResolutionError,
                     TruncationError, UnsupportedOracleError)


@dataclass(frozen=True, eq=False)
class PeriodicCoefficient:
    """A ``d x d`` matrix-valued trigonometric polynomial ``sum_k c_k e^{ikx}``."""

    modes: dict
    is_real: bool = True

    def __post_init__(self):
        clean = {}
        dim = None
        for k, amp in self.modes.items():
            if int(k) != k:
                raise ConfigurationError(f"harmonic index must be an integer, got {k!r}")
            a = np.atleast_2d(np.asarray(amp, dtype=complex))
            if a.shape[0] != a.shape[1]:
                raise ConfigurationError(f"mode {k} amplitude must be square, got shape {a.shape}")
            if dim is not None and a.shape != dim:
                raise ConfigurationError("all modes of a coefficient must share one shape")
            dim = a.shape
            if np.any(a != 0):
                clean[int(k)] = clean.get(int(k), 0) + a
        object.__setattr__(self, "modes", clean)
        object.__setattr__(self, "_dim", 1 if dim is None else dim[0])
        if self.is_real:
            for k, a in clean.items():
                partner = clean.get(-k, np.zeros_like(a))
                if not np.allclose(partner, np.conj(a), rtol=1e-14, atol=1e-14):
                    raise ConfigurationError(
                        f"real coefficient needs mode(-{k}) = conj(mode({k}))")

    @classmethod
    def constant(cls, value, components=1):
        value = np.asarray(value, dtype=complex)
        if value.ndim == 0 and components > 1:
            value = value * np.eye(components)
        return cls({0: value}, is_real=bool(np.all(np.imag(value) == 0)))

    @classmethod
    def cosine(cls, amplitude, harmonic=1):
        """``amplitude * cos(harmonic * x)``."""
        return cls({harmonic: amplitude / 2, -harmonic: amplitude / 2})

    @classmethod
    def from_triples(cls, triples, is_real=True):
        """Scalar coefficient from ``[[k, re, im], ...]`` rows."""
        modes = {}
        for row in triples:
            if len(row) != 3:
                raise ConfigurationError(f"mode rows must be [k, re, im], got {row!r}")
            k, re, im = row
            modes[int(k)] = modes.get(int(k), 0) + complex(re, im)
        return cls(modes, is_real=is_real)

    @property
    def components(self):
        return self._dim

    @property
    def bandwidth(self):
        return max((abs(k) for k in self.modes), default=0)

    @property
    def is_constant(self):
        return all(k == 0 for k in self.modes)

    @property
    def is_zero(self):
        return not self.modes

    def mode(self, k):
        return self.modes.get(int(k), np.zeros((self._dim, self._dim), dtype=complex))

    def mode_array(self, max_harmonic):
        """Modes ``-max_harmonic..max_harmonic`` stacked as ``(2K+1, d, d)``."""
        out = np.zeros((2 * max_harmonic + 1, self._dim, self._dim), dtype=complex)
        for k, a in self.modes.items():
            if abs(k) <= max_harmonic:
                out[k + max_harmonic] = a
        return out

    def evaluate(self, x):
        """Values at points ``x`` as an array of shape ``(d, d, len(x))``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros((self._dim, self._dim, x.size), dtype=complex)
        for k, a in self.modes.items():
            out += a[:, :, None] * np.exp(1j * k * x)[None, None, :]
        return out

    def derivative(self):
        return PeriodicCoefficient({k: 1j * k * a for k, a in self.modes.items()}, self.is_real)

    def __add__(self, other):
        modes = dict(self.modes)
        for k, a in other.modes.items():
            modes[k] = modes.get(k, 0) + a
        return PeriodicCoefficient(modes, self.is_real and other.is_real)

    def __mul__(self, scalar):
        scalar = complex(scalar)
        return PeriodicCoefficient({k: scalar * a for k, a in self.modes.items()},
                                   self.is_real and scalar.imag == 0)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1


@dataclass(frozen=True, eq=False)
class PeriodicOperator:
    """``L = sum_j a_j(x) d_x^j`` with 2pi-periodic coefficients ``a_j``.

    Construction only checks internal consistency; :meth:`validate` applies the
    even-order and sectoriality rules required of a time-evolution generator.
    """

    terms: dict
    components: int = 1

    def __post_init__(self):
        clean = {}
        for j, coeff in self.terms.items():
            if int(j) != j or j < 0:
                raise ConfigurationError(f"derivative order must be a non-negative integer, got {j!r}")
            if not isinstance(coeff, PeriodicCoefficient):
                coeff = PeriodicCoefficient.constant(coeff, self.components)
            if coeff.is_zero:
                continue
            if coeff.components != self.components:
                raise ConfigurationError(
                    f"order-{j} coefficient is {coeff.components}x{coeff.components}, "
                    f"operator has {self.components} components")
            clean[int(j)] = clean[int(j)] + coeff if int(j) in clean else coeff
        if not clean:
            raise ConfigurationError("operator has no nonzero coefficient")
        object.__setattr__(self, "terms", dict(sorted(clean.items())))

    @property
    def order(self):
        return max(self.terms)

    @property
    def bandwidth(self):
        return max(c.bandwidth for c in self.terms.values())

    @property
    def is_constant(self):
        return all(c.is_constant for c in self.terms.values())

    @property
    def is_real(self):
        return all(c.is_real for c in self.terms.values())

    def coefficient(self, j):
        if j in self.terms:
            return self.terms[j]
        return PeriodicCoefficient({0: np.zeros((self.components, self.components))})

    def shifted(self, c):
        """``L + c * identity``."""
        terms = dict(self.terms)
        shift = PeriodicCoefficient.constant(c, self.components)
        terms[0] = terms[0] + shift if 0 in terms else shift
        return PeriodicOperator(terms, self.components)

    def __add__(self, other):
        terms = dict(self.terms)
        for j, c in other.terms.items():
            terms[j] = terms[j] + c if j in terms else c
        return PeriodicOperator(terms, self.components)

    def sectorial_margin(self, kappas=None, n_x=64):
        """Largest real part of the leading symbol term ``(i kappa)^2n a_2n(x)``.

        Negative means the leading part is dissipative on the sampled
        ``kappa`` and ``x`` grids, which is the sectoriality heuristic.
        """
        if kappas is None:
            kappas = np.logspace(1, 4, 16)
        lead = self.terms[self.order].evaluate(2 * np.pi * np.arange(n_x) / n_x)
        worst = -np.inf
        for kappa in kappas:
            sym = (1j * kappa) ** self.order * np.moveaxis(lead, -1, 0)
            worst = max(worst, float(np.max(np.linalg.eigvals(sym).real)) / kappa ** self.order)
        return worst

    def validate(self):
        if self.order < 2 or self.order % 2:
            raise ConfigurationError(f"operator order must be even and >= 2, got {self.order}")
        if self.sectorial_margin() >= 0:
            raise ConfigurationError(
                "leading coefficient fails the sectoriality check: "
                "Re[(i kappa)^2n a_2n] must be negative for large kappa")
        return self


@dataclass(frozen=True, eq=False)
class BlochMatrix:
    xi: float
    truncation: int
    entries: np.ndarray
    components: int = 1

    @property
    def harmonics(self):
        return np.arange(-self.truncation, self.truncation + 1)

    @property
    def is_diagonal(self):
        e = self.entries
        return not np.any(e - np.diag(np.diag(e)))


def _check_xi(xi):
    if not -0.5 <= xi < 0.5:
        raise DomainError(f"xi={xi!r} is outside [-1/2, 1/2)")


def assemble_bloch_matrix(op: PeriodicOperator, xi: float, M: int) -> BlochMatrix:
    """Galerkin matrix of ``L_xi`` on harmonics ``-M..M`` (component-major blocks)."""
    _check_xi(xi)
    if M < op.bandwidth:
        raise TruncationError(f"truncation M={M} is below the coefficient bandwidth {op.bandwidth}")
    d, width = op.components, 2 * M + 1
    k = np.arange(-M, M + 1)
    diff = k[:, None] - k[None, :] + 2 * M
    entries = np.zeros((d * width, d * width), dtype=complex)
    for j, coeff in op.terms.items():
        modes = coeff.mode_array(2 * M)
        sym = (1j * (k + xi)) ** j
        for r in range(d):
            for c in range(d):
                block = modes[:, r, c][diff] * sym[None, :]
                entries[r * width:(r + 1) * width, c * width:(c + 1) * width] += block
    return BlochMatrix(float(xi), M, entries, d)


def symbol_eval(op: PeriodicOperator, kappa):
    """``sum_j a_j (i kappa)^j`` for a constant-coefficient operator."""
    if not op.is_constant:
        raise UnsupportedOracleError("symbol_eval needs constant coefficients")
    total = sum(c.mode(0) * (1j * kappa) ** j for j, c in op.terms.items())
    total = np.asarray(total)
    return complex(total[0, 0]) if op.components == 1 else total


def check_resolution(op: PeriodicOperator, u: SampledFunction, tol=1e-10):
    """Aliasing detector for pseudospectral products with the coefficients."""
    grid = u.grid
    nyquist = grid.points_per_period / 2
    kc = op.bandwidth
    if kc >= nyquist:
        raise ResolutionError(f"coefficient bandwidth {kc} is not resolved by "
                              f"{grid.points_per_period} points per period")
    power = np.sum(np.abs(u.fourier) ** 2, axis=0)
    total = power.sum()
    if total == 0:
        return
    edge = nyquist - kc if kc else nyquist
    risky = np.abs(grid.wavenumbers) >= edge
    if np.sqrt(power[risky].sum() / total) > tol:
        raise ResolutionError(
            f"input carries energy at |kappa| >= {edge:g}; products with coefficients of "
            f"bandwidth {kc} would alias on {grid.points_per_period} points per period")


def apply_operator(op: PeriodicOperator, u: SampledFunction, check=True) -> SampledFunction:
    """Pseudospectral ``L u``: spectral derivatives times pointwise coefficients."""
    if u.components != op.components:
        raise ConfigurationError(f"operator has {op.components} components, input has {u.components}")
    if check:
        check_resolution(op, u)
    grid = u.grid
    kappa = grid.wavenumbers
    nyquist_slot = np.abs(kappa) == grid.points_per_period / 2
    out = np.zeros_like(u.values)
    for j, coeff in op.terms.items():
        mult = (1j * kappa) ** j
        if j % 2:
            mult = np.where(nyquist_slot, 0, mult)
        deriv = np.fft.ifft(u.fourier * mult, axis=-1) * grid.n_points
        a = coeff.evaluate(grid.x)
        out += np.einsum("rcx,cx->rx", a, deriv)
    return SampledFunction(grid, out)


@dataclass(frozen=True)
class Nonlinearity:
    """``none``, ``power`` (``scale * |u|^(p-1) u``) or ``advective`` (``-u u_x``)."""

    kind: str = "none"
    p: float = 2.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "power", "advective"):
            raise ConfigurationError(f"nonlinearity.kind must be none|power|advective, got {self.kind!r}")
        if self.kind == "power" and not self.p > 1:
            raise ConfigurationError(f"nonlinearity.p must exceed 1, got {self.p!r}")
        if self.kind == "advective" and self.p != 2:
            object.__setattr__(self, "p", 2.0)

    @property
    def is_quadratic(self):
        return self.kind == "advective"

    def estimate_constant(self, grid):
        """Constant ``C`` with ``||N(u)||_L2 <= C ||u||_L2^p`` on this grid (power kind).

        Uses ``||u||_inf <= ||u||_L2 / sqrt(dx)`` for grid functions.
        """
        if self.kind != "power":
            raise UnsupportedOracleError(f"no L2 polynomial estimate for kind {self.kind!r}")
        return abs(self.scale) * grid.dx ** (-(self.p - 1) / 2)

    def fourier(self, grid, F, dealias=True):
        """``N(u)`` in box Fourier coefficients, given ``u``'s coefficients ``F``."""
        n = grid.n_points
        if self.kind == "none":
            return np.zeros_like(F)
        if self.kind == "power":
            u = np.fft.ifft(F, axis=-1) * n
            return np.fft.fft(self.scale * np.abs(u) ** (self.p - 1) * u, axis=-1) / n
        mask = dealias_mask(grid) if dealias else np.ones(n, dtype=bool)
        u = np.fft.ifft(F * mask, axis=-1) * n
        sq = np.fft.fft(u * u, axis=-1) / n
        return -0.5 * 1j * grid.wavenumbers * sq * mask

    def __call__(self, u: SampledFunction, dealias=True):
        F = self.fourier(u.grid, u.fourier, dealias)
        return SampledFunction(u.grid, np.fft.ifft(F, axis=-1) * u.grid.n_points)


def dealias_mask(grid):
    """2/3-rule mask on the box DFT slots."""
    return np.abs(grid.signed_index) < grid.n_points / 3


def heat_operator(diffusion=1.0, shift=0.0):
    terms = {2: diffusion}
    if shift:
        terms[0] = shift
    return PeriodicOperator(terms)


def mathieu_operator(q, shift=0.0):
    """``d_x^2 + 2 q cos(x) + shift``."""
    a0 = PeriodicCoefficient.cosine(2 * q) + PeriodicCoefficient.constant(shift)
    return PeriodicOperator({2: 1.0, 0: a0})


def kdvks_operator(beta, phi=None):
    """Linear part of ``u_t + u_xxx + beta(u_xx + u_xxxx) + phi u_x + phi' u = 0``."""
    terms = {4: -beta, 3: -1.0, 2: -beta}
    if phi is not None and not phi.is_zero:
        terms[1] = -phi
        if not phi.derivative().is_zero:
            terms[0] = -phi.derivative()
    return PeriodicOperator(terms)
