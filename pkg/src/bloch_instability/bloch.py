"""Bloch transform on a periodized box of ``periods`` copies of [0, 2*pi).

The box of length ``2*pi*N_per`` carries the frequencies ``kappa = s / N_per``.
Writing ``kappa = j + xi_m`` with integer ``j`` and ``xi_m`` in [-1/2, 1/2)
turns the box DFT into the Bloch transform by pure re-indexing, so the
transform pair is exact (no interpolation in ``xi``).

Normalizations:

* box functions use the true integral norm ``int |f|^2 dx``;
* one-period functions use the mean-square norm ``(1/2pi) int_0^2pi |g|^2``,
  which is the plain Euclidean norm of the harmonic coefficients;
* ``f(x) = sum_m w_m exp(i xi_m x) fcheck(xi_m, x)`` with ``w_m = 1/N_per``.

With these choices ``||f||^2 = 2*pi * sum_m w_m ||fcheck(xi_m)||^2`` holds
exactly in floating point up to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, ShapeError


@dataclass(frozen=True)
class SpatialGrid:
    periods: int
    points_per_period: int

    def __post_init__(self):
        n_per, n_x = self.periods, self.points_per_period
        if int(n_per) != n_per or n_per < 2 or n_per % 2:
            raise ConfigurationError(f"grid.periods must be an even integer >= 2, got {n_per!r}")
        if int(n_x) != n_x or n_x < 32 or (n_x & (n_x - 1)):
            raise ConfigurationError(
                f"grid.points_per_period must be a power of two >= 32, got {n_x!r}")

    @property
    def n_points(self):
        return self.periods * self.points_per_period

    @property
    def length(self):
        return 2 * np.pi * self.periods

    @property
    def dx(self):
        return 2 * np.pi / self.points_per_period

    @cached_property
    def x(self):
        return self.dx * np.arange(self.n_points)

    @cached_property
    def x_period(self):
        return self.dx * np.arange(self.points_per_period)

    @cached_property
    def signed_index(self):
        """Signed DFT index ``s`` of each FFT slot; ``kappa = s / periods``."""
        return np.rint(np.fft.fftfreq(self.n_points) * self.n_points).astype(int)

    @cached_property
    def wavenumbers(self):
        return self.signed_index / self.periods

    @cached_property
    def xi(self):
        return -0.5 + np.arange(self.periods) / self.periods

    @cached_property
    def _bloch_index(self):
        s = self.signed_index
        half = self.periods // 2
        m = (s + half) % self.periods
        j = (s + half - m) // self.periods
        return m, j

    def harmonic_of(self, slot):
        """(xi index, harmonic j) of a box FFT slot."""
        m, j = self._bloch_index
        return int(m[slot]), int(j[slot])

    def slot_of(self, m, j):
        """Box FFT slot holding frequency ``j + xi_m``."""
        s = j * self.periods - self.periods // 2 + m
        if not -self.n_points // 2 <= s < self.n_points // 2:
            raise ConfigurationError(f"frequency {j} + xi_{m} is not resolved by the grid")
        return s % self.n_points


def _as_components(values, grid):
    arr = np.asarray(values)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != grid.n_points:
        raise ShapeError(f"expected values of shape (d, {grid.n_points}), got {np.shape(values)}")
    return arr.astype(complex)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Samples of a (possibly vector-valued) function on a :class:`SpatialGrid`.

    ``values`` has shape ``(d, n_points)``; a 1-D array is read as ``d = 1``.
    """

    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_components(self.values, self.grid))

    @property
    def components(self):
        return self.values.shape[0]

    @classmethod
    def from_callable(cls, grid, func):
        return cls(grid, np.atleast_2d(func(grid.x)))

    @classmethod
    def zeros(cls, grid, components=1):
        return cls(grid, np.zeros((components, grid.n_points), dtype=complex))

    @cached_property
    def fourier(self):
        """Coefficients ``F_s`` with ``f(x) = sum_s F_s exp(i kappa_s x)``."""
        return np.fft.fft(self.values, axis=-1) / self.grid.n_points

    def sobolev_norm(self, order=0):
        """Spectral ``H^order`` norm, ``sum_{l<=order} ||d^l f||^2`` under the root."""
        kappa2 = self.grid.wavenumbers ** 2
        weight = sum(kappa2 ** l for l in range(order + 1))
        total = self.grid.length * np.sum(weight * np.abs(self.fourier) ** 2)
        return float(np.sqrt(total))

    @cached_property
    def l2(self):
        return self.sobolev_norm(0)

    @cached_property
    def h1(self):
        return self.sobolev_norm(1)

    @cached_property
    def h2(self):
        return self.sobolev_norm(2)

    def norm(self, space="L2"):
        return {"L2": self.l2, "H1": self.h1, "H2": self.h2}[space.upper()]

    def derivative(self, order=1):
        mult = (1j * self.grid.wavenumbers) ** order
        return SampledFunction(self.grid, np.fft.ifft(self.fourier * mult, axis=-1) * self.grid.n_points)

    def mean(self):
        return self.fourier[:, 0].copy()

    def with_values(self, values):
        return SampledFunction(self.grid, values)

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar):
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def is_real(self, tol=1e-12):
        scale = max(np.max(np.abs(self.values)), 1e-300)
        return bool(np.max(np.abs(self.values.imag)) <= tol * scale)


@dataclass(frozen=True, eq=False)
class BlochField:
    """Bloch transform samples ``values[c, m, n] = fcheck_c(xi_m, x_n)``."""

    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=complex)
        if arr.ndim == 2:
            arr = arr[None]
        shape = (self.grid.periods, self.grid.points_per_period)
        if arr.ndim != 3 or arr.shape[1:] != shape:
            raise ShapeError(f"expected Bloch field of shape (d, {shape[0]}, {shape[1]}), got {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def xi(self):
        return self.grid.xi

    @property
    def components(self):
        return self.values.shape[0]

    @property
    def weights(self):
        return np.full(self.grid.periods, 1.0 / self.grid.periods)

    def coefficients(self):
        """Harmonic coefficients per xi, harmonic ``j`` stored at slot ``j mod N_x``."""
        return np.fft.fft(self.values, axis=-1) / self.grid.points_per_period

    @classmethod
    def from_coefficients(cls, grid, coeffs):
        return cls(grid, np.fft.ifft(coeffs, axis=-1) * grid.points_per_period)

    def period_norms(self):
        """Mean-square one-period norm of ``fcheck(xi_m, .)`` for each ``m``."""
        return np.sqrt(np.sum(np.mean(np.abs(self.values) ** 2, axis=-1), axis=0))

    def galerkin(self, truncation):
        """Stack harmonics ``|k| <= truncation`` into vectors of length ``d(2M+1)``.

        Layout is component-major: index ``c*(2M+1) + (k + M)``.
        """
        _check_truncation(self.grid, truncation)
        ks = np.arange(-truncation, truncation + 1) % self.grid.points_per_period
        coeffs = self.coefficients()[:, :, ks]
        return np.transpose(coeffs, (1, 0, 2)).reshape(self.grid.periods, -1)

    @classmethod
    def from_galerkin(cls, grid, vectors, truncation, components=1):
        _check_truncation(grid, truncation)
        vectors = np.asarray(vectors, dtype=complex)
        width = 2 * truncation + 1
        if vectors.shape != (grid.periods, components * width):
            raise ShapeError(f"expected Galerkin vectors of shape {(grid.periods, components * width)}, "
                             f"got {vectors.shape}")
        coeffs = np.zeros((components, grid.periods, grid.points_per_period), dtype=complex)
        ks = np.arange(-truncation, truncation + 1) % grid.points_per_period
        coeffs[:, :, ks] = np.transpose(vectors.reshape(grid.periods, components, width), (1, 0, 2))
        return cls.from_coefficients(grid, coeffs)

    def __add__(self, other):
        return BlochField(self.grid, self.values + other.values)

    def __mul__(self, scalar):
        return BlochField(self.grid, self.values * scalar)

    __rmul__ = __mul__


def _check_truncation(grid, truncation):
    if truncation < 0 or truncation > grid.points_per_period // 2 - 1:
        raise ConfigurationError(
            f"truncation M={truncation} must satisfy 0 <= M <= points_per_period/2 - 1 "
            f"= {grid.points_per_period // 2 - 1}")


def box_to_bloch_coefficients(grid, fourier):
    """Re-index box DFT coefficients ``F_s`` into per-xi harmonic coefficients."""
    m, j = grid._bloch_index
    coeffs = np.zeros((fourier.shape[0], grid.periods, grid.points_per_period), dtype=complex)
    coeffs[:, m, j % grid.points_per_period] = grid.periods * fourier
    return coeffs


def bloch_to_box_fourier(grid, coeffs):
    m, j = grid._bloch_index
    return coeffs[:, m, j % grid.points_per_period] / grid.periods


def bloch_transform(f: SampledFunction) -> BlochField:
    coeffs = box_to_bloch_coefficients(f.grid, f.fourier)
    return BlochField.from_coefficients(f.grid, coeffs)


def inverse_bloch(F: BlochField, grid: SpatialGrid | None = None) -> SampledFunction:
    if grid is not None and grid != F.grid:
        raise ShapeError(f"Bloch field lives on {F.grid}, not {grid}")
    fourier = bloch_to_box_fourier(F.grid, F.coefficients())
    return SampledFunction(F.grid, np.fft.ifft(fourier, axis=-1) * F.grid.n_points)


def isometry_defect(f: SampledFunction, floor=1e-300) -> float:
    lhs = f.l2 ** 2
    F = bloch_transform(f)
    rhs = 2 * np.pi * np.sum(F.weights * F.period_norms() ** 2)
    return float(abs(lhs - rhs) / max(lhs, floor))


def fourier_mode(grid, k, m, amplitude=1.0, components=1, component=0):
    """The box mode ``amplitude * exp(i (k + xi_m) x)`` in one component."""
    values = np.zeros((components, grid.n_points), dtype=complex)
    values[component] = amplitude * np.exp(1j * (k + grid.xi[m]) * grid.x)
    return SampledFunction(grid, values)


def random_band_limited(grid, bandwidth, seed=0, components=1, real=True, decay=None):
    """Seeded random data with box spectrum supported in ``|kappa| <= bandwidth``.

    ``decay`` optionally multiplies each coefficient by ``exp(-(kappa/decay)^2)``.
    """
    rng = np.random.default_rng(seed)
    kappa = grid.wavenumbers
    mask = np.abs(kappa) <= bandwidth
    coeffs = np.zeros((components, grid.n_points), dtype=complex)
    shape = (components, int(mask.sum()))
    coeffs[:, mask] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if decay is not None:
        coeffs *= np.exp(-(kappa / decay) ** 2)
    values = np.fft.ifft(coeffs, axis=-1) * grid.n_points
    if real:
        values = values.real
    f = SampledFunction(grid, values)
    return f * (1.0 / f.l2) if f.l2 > 0 else f
