import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bloch_instability.bloch import (BlochField, SampledFunction, SpatialGrid, bloch_transform,
                                     fourier_mode, inverse_bloch, isometry_defect,
                                     random_band_limited)
from bloch_instability.errors import ConfigurationError, ShapeError

GRID = SpatialGrid(8, 32)


@pytest.mark.parametrize("periods,points", [(3, 32), (0, 32), (4, 48), (4, 16)])
def test_grid_rejects_bad_shapes(periods, points):
    with pytest.raises(ConfigurationError):
        SpatialGrid(periods, points)


def test_grid_xi_matches_box_floquet_exponents():
    assert np.allclose(GRID.xi, -0.5 + np.arange(8) / 8)
    for slot in range(GRID.n_points):
        m, j = GRID.harmonic_of(slot)
        assert np.isclose(GRID.wavenumbers[slot], j + GRID.xi[m])
        assert GRID.slot_of(m, j) == slot


def test_low_frequency_function_is_constant_in_x():
    # frequencies strictly inside (-1/2, 1/2): only harmonic j = 0 contributes
    f = fourier_mode(GRID, 0, 3, amplitude=2.0) + fourier_mode(GRID, 0, 6, amplitude=-1j)
    F = bloch_transform(f)
    assert np.allclose(F.values[0, 3], 2.0 * GRID.periods)
    assert np.allclose(F.values[0, 6], -1j * GRID.periods)
    assert np.allclose(np.delete(F.values[0], [3, 6], axis=0), 0)


def test_shift_by_one_harmonic_multiplies_by_exp_ix():
    g = fourier_mode(GRID, 0, 2)
    f = g.with_values(g.values * np.exp(1j * GRID.x))
    Fg, Ff = bloch_transform(g), bloch_transform(f)
    assert np.allclose(Ff.values[0, 2], Fg.values[0, 2] * np.exp(1j * GRID.x_period))


def test_inverse_of_zero_and_of_unit_mass_at_xi_zero():
    zero = BlochField(GRID, np.zeros((GRID.periods, GRID.points_per_period)))
    assert np.all(inverse_bloch(zero).values == 0)
    vals = np.zeros((GRID.periods, GRID.points_per_period), dtype=complex)
    vals[GRID.periods // 2] = 1.0
    f = inverse_bloch(BlochField(GRID, vals))
    assert np.allclose(f.values, 1.0 / GRID.periods)


def test_inverse_rejects_mismatched_grid():
    F = bloch_transform(random_band_limited(GRID, 3, seed=1))
    with pytest.raises(ShapeError):
        inverse_bloch(F, SpatialGrid(4, 32))
    with pytest.raises(ShapeError):
        BlochField(GRID, np.zeros((4, 32)))


def test_zak_sum_oracle():
    # fcheck(xi, x) = sum_p f(x + 2 pi p) exp(-i xi (x + 2 pi p)), exact on the box
    f = random_band_limited(GRID, 5, seed=2, real=False)
    F = bloch_transform(f)
    n_x = GRID.points_per_period
    for m, xi in enumerate(GRID.xi):
        zak = sum(f.values[0, p * n_x:(p + 1) * n_x] * np.exp(-1j * xi * GRID.x[p * n_x:(p + 1) * n_x])
                  for p in range(GRID.periods))
        assert np.allclose(F.values[0, m], zak, atol=1e-12)


def test_isometry_on_zero_and_single_mode():
    assert isometry_defect(SampledFunction.zeros(GRID)) == 0
    assert isometry_defect(fourier_mode(GRID, 2, 5)) < 1e-12


def test_isometry_on_periodized_gaussian():
    g = SpatialGrid(16, 64)
    x = g.x - g.length / 2
    f = SampledFunction(g, np.exp(-x ** 2 / 20) * np.cos(0.7 * x))
    assert isometry_defect(f) < 1e-8
    # direct DFT Parseval sum as the second oracle
    assert np.isclose(f.l2 ** 2, np.sum(np.abs(f.values) ** 2) * g.dx, rtol=1e-12)


def test_spectral_norms_match_trapezoid_quadrature():
    f = random_band_limited(GRID, 4, seed=9)
    dx = GRID.dx
    d1 = f.derivative(1).values
    d2 = f.derivative(2).values
    l2 = np.sqrt(np.sum(np.abs(f.values) ** 2) * dx)
    h1 = np.sqrt(l2 ** 2 + np.sum(np.abs(d1) ** 2) * dx)
    h2 = np.sqrt(h1 ** 2 + np.sum(np.abs(d2) ** 2) * dx)
    assert np.allclose([f.l2, f.h1, f.h2], [l2, h1, h2], rtol=1e-8)


def test_galerkin_round_trip():
    f = random_band_limited(GRID, 6, seed=4, real=False)
    F = bloch_transform(f)
    back = BlochField.from_galerkin(GRID, F.galerkin(15), 15)
    assert np.allclose(back.values, F.values, atol=1e-12)
    with pytest.raises(ConfigurationError):
        F.galerkin(16)


@given(seed=st.integers(0, 10_000), bandwidth=st.floats(0.5, 12.0), real=st.booleans())
def test_round_trip_and_parseval_property(seed, bandwidth, real):
    f = random_band_limited(GRID, bandwidth, seed=seed, real=real)
    back = inverse_bloch(bloch_transform(f))
    assert np.linalg.norm(back.values - f.values) <= 1e-10 * np.linalg.norm(f.values)
    assert isometry_defect(f) < 1e-8


@given(a=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       b=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       seed=st.integers(0, 1000))
def test_linearity_property(a, b, seed):
    f = random_band_limited(GRID, 5, seed=seed, real=False)
    g = random_band_limited(GRID, 3, seed=seed + 1, real=False)
    lhs = bloch_transform(f * a + g * b).values
    rhs = (bloch_transform(f) * a + bloch_transform(g) * b).values
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)) * GRID.periods)
