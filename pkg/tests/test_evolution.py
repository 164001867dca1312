import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bloch_instability.bloch import SpatialGrid, fourier_mode, random_band_limited
from bloch_instability.errors import (ConfigurationError, DomainError, GrowthOverflowError,
                                      ResolutionError, UnsupportedOracleError)
from bloch_instability.evolution import (BlochPropagator, dense_box_evolve, linear_evolve,
                                         linear_trajectory, nonlinear_evolve)
from bloch_instability.operators import (Nonlinearity, PeriodicCoefficient, heat_operator,
                                         kdvks_operator, mathieu_operator)

SMALL = SpatialGrid(4, 32)


def test_zero_time_is_identity():
    u0 = random_band_limited(SMALL, 5, seed=0)
    out = linear_evolve(mathieu_operator(1.0), u0, 0.0)
    assert np.array_equal(out.values, u0.values) and out is not u0


def test_negative_time_rejected():
    with pytest.raises(DomainError):
        linear_evolve(heat_operator(), random_band_limited(SMALL, 3), -1.0)


def test_heat_mode_decays_at_symbol_rate():
    grid = SpatialGrid(8, 32)
    u0 = fourier_mode(grid, 1, 2)
    kappa = 1 + grid.xi[2]
    out = linear_evolve(heat_operator(), u0, 0.7)
    assert np.allclose(out.values, np.exp(-kappa ** 2 * 0.7) * u0.values, atol=1e-13)


@pytest.mark.parametrize("op", [mathieu_operator(1.0), kdvks_operator(0.3, PeriodicCoefficient.cosine(0.4)),
                                heat_operator(0.5, 0.2)])
def test_matches_dense_box_exponential(op):
    u0 = random_band_limited(SMALL, 5, seed=2)
    a = linear_evolve(op, u0, 0.5)
    b = dense_box_evolve(op, u0, 0.5)
    assert (a - b).l2 / b.l2 < 1e-9


def test_dense_oracle_size_limit():
    with pytest.raises(UnsupportedOracleError):
        dense_box_evolve(heat_operator(), random_band_limited(SpatialGrid(64, 64), 2), 0.1)


def test_truncation_guard():
    u0 = random_band_limited(SMALL, 7, seed=1)
    with pytest.raises(ResolutionError):
        linear_evolve(heat_operator(), u0, 0.1, M=3)
    with pytest.raises(ConfigurationError):
        BlochPropagator(heat_operator(), SMALL, 16)


def test_overflow_is_reported():
    u0 = fourier_mode(SMALL, 0, 0)
    with pytest.raises(GrowthOverflowError):
        linear_evolve(heat_operator(shift=1.0), u0, 40.0, overflow=1e12)


def test_linear_trajectory_is_semigroup():
    op = mathieu_operator(0.6)
    u0 = random_band_limited(SMALL, 4, seed=4)
    times, states = linear_trajectory(op, u0, 1.0, 10)
    assert np.allclose(times, np.linspace(0, 1, 11))
    direct = linear_evolve(op, u0, 1.0).fourier
    assert np.allclose(states[-1], direct, atol=1e-12)


@pytest.mark.parametrize("op,method", [(kdvks_operator(0.2), "etdrk4"),
                                       (mathieu_operator(0.5), "splitting")])
def test_zero_nonlinearity_reduces_to_linear(op, method):
    grid = SpatialGrid(4, 32)
    u0 = random_band_limited(grid, 6, seed=3)
    traj = nonlinear_evolve(op, Nonlinearity("none"), u0, 0.5, 2.0, 0.01, method=method)
    assert traj.method == method
    lin = linear_evolve(op, u0 * 0.5, 2.0)
    assert (traj.final - lin).l2 / lin.l2 < 1e-8


def test_lands_exactly_on_end_time():
    traj = nonlinear_evolve(heat_operator(), Nonlinearity("none"), random_band_limited(SMALL, 3),
                            1.0, 1.0, 0.3)
    assert traj.t_end == pytest.approx(1.0, abs=1e-14)
    assert traj.times.size == 5


def test_advective_flow_conserves_mean():
    grid = SpatialGrid(8, 32)
    op = kdvks_operator(0.3, PeriodicCoefficient.cosine(0.2))
    u0 = random_band_limited(grid, 5, seed=6)
    u0 = u0.with_values(u0.values + 0.3)
    traj = nonlinear_evolve(op, Nonlinearity("advective"), u0, 0.2, 2.0, 0.01, snapshot_stride=50)
    means = [s.mean() for s in traj.states]
    assert np.allclose(means, means[0], atol=1e-12)


def test_quadratic_deviation_scales_like_delta_squared():
    grid = SpatialGrid(4, 32)
    op = kdvks_operator(0.2)
    u0 = random_band_limited(grid, 5, seed=8)
    dev = []
    for delta in (1e-2, 5e-3):
        traj = nonlinear_evolve(op, Nonlinearity("advective"), u0, delta, 1.0, 0.01)
        dev.append((traj.final - linear_evolve(op, u0 * delta, 1.0)).l2)
    assert dev[0] / dev[1] == pytest.approx(4.0, rel=0.02)


def test_etdrk4_fourth_order():
    grid = SpatialGrid(2, 32)
    op = kdvks_operator(0.2)
    u0 = random_band_limited(grid, 4, seed=9)
    nl = Nonlinearity("power", 3.0, 1.0)
    ref = nonlinear_evolve(op, nl, u0, 1.0, 1.0, 0.0025).final
    errs = [(nonlinear_evolve(op, nl, u0, 1.0, 1.0, h).final - ref).l2 for h in (0.04, 0.02)]
    assert 10 < errs[0] / errs[1] < 22


def test_refinement_records_history():
    traj = nonlinear_evolve(kdvks_operator(0.2), Nonlinearity("advective"),
                            random_band_limited(SMALL, 4, seed=1), 0.1, 0.5, 0.1, refine=True)
    assert traj.stability["dt_history"][0] == pytest.approx(0.1)
    assert traj.stability["refine_change"] < 1e-6


def test_input_validation():
    u0 = random_band_limited(SMALL, 3)
    with pytest.raises(DomainError):
        nonlinear_evolve(heat_operator(), Nonlinearity(), u0, 1.0, 0.0, 0.1)
    with pytest.raises(ConfigurationError):
        nonlinear_evolve(heat_operator(), Nonlinearity(), u0, 1.0, 1.0, 0.1, method="euler")
    with pytest.raises(UnsupportedOracleError):
        nonlinear_evolve(mathieu_operator(1.0), Nonlinearity(), u0, 1.0, 1.0, 0.1, method="etdrk4")


def test_power_ratio_tracked():
    traj = nonlinear_evolve(heat_operator(), Nonlinearity("power", 3.0, -1.0),
                            random_band_limited(SMALL, 3, seed=2), 0.5, 0.5, 0.05)
    assert traj.nonlinear_ratio.shape == traj.times.shape
    assert np.all(traj.nonlinear_ratio > 0)


@settings(max_examples=10)
@given(t=st.floats(0.05, 1.0), s=st.floats(0.05, 1.0), seed=st.integers(0, 1000))
def test_semigroup_property(t, s, seed):
    op = mathieu_operator(0.7, -0.3)
    u0 = random_band_limited(SMALL, 5, seed=seed)
    a = linear_evolve(op, linear_evolve(op, u0, t), s)
    b = linear_evolve(op, u0, t + s)
    assert (a - b).l2 <= 1e-10 * max(b.l2, 1.0)


@settings(max_examples=10)
@given(seed=st.integers(0, 1000))
def test_real_data_stays_real(seed):
    u0 = random_band_limited(SMALL, 5, seed=seed)
    assert linear_evolve(kdvks_operator(0.3, PeriodicCoefficient.cosine(0.2)), u0, 0.4).is_real(1e-10)
