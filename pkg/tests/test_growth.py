import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bloch_instability.bloch import SpatialGrid, fourier_mode
from bloch_instability.errors import (ConfigurationError, DampingFailure, DiagnosticsError,
                                      EtaTooLargeError, HypothesisError)
from bloch_instability.evolution import nonlinear_evolve
from bloch_instability.growth import (damping_check, damping_integral, dissipative_bound,
                                      dissipative_coefficients, fit_growth_sandwich, fit_rate,
                                      instability_experiment, instability_time, polynomial_bound,
                                      rho_series, dissipative_rates_ok)
from bloch_instability.operators import Nonlinearity, heat_operator, kdvks_operator
from bloch_instability.projections import lambda_M
from bloch_instability.spectra import XiGrid, bloch_spectrum

GRID = SpatialGrid(16, 32)


def test_fit_rate_recovers_exponent():
    t = np.linspace(0, 5, 40)
    assert fit_rate(t, 3 * np.exp(0.37 * t)) == pytest.approx(0.37)
    with pytest.raises(DiagnosticsError):
        fit_rate(t[:5], np.exp(t[:5]))
    with pytest.raises(DiagnosticsError):
        fit_rate(t, np.zeros_like(t))


def test_instability_time_examples():
    assert instability_time(0.1, 1e-3, 0.25) == pytest.approx(21.1933, abs=1e-4)
    step = instability_time(0.1, 5e-4, 0.25) - instability_time(0.1, 1e-3, 0.25)
    assert step == pytest.approx(2.7726, abs=1e-4)
    with pytest.raises(HypothesisError):
        instability_time(0.1, 1e-3, 0.0)
    with pytest.raises(ConfigurationError):
        instability_time(0.1, 0.3, 0.25)


def test_polynomial_bound_examples():
    b = polynomial_bound(2, 0.1, 1.0, 1.0, 1.0)
    assert b.z_star == pytest.approx(2.5)
    assert b.g_star == pytest.approx(-0.25)
    assert b.root == pytest.approx((1 - np.sqrt(0.2)) / 0.4, abs=1e-12)
    assert b.g(b.root) == pytest.approx(0, abs=1e-12)
    far = polynomial_bound(2, 0.5, 1.0, 1.0, 1.0)
    assert not far.has_root and far.to_dict()["status"] == "eta_too_large"
    with pytest.raises(HypothesisError):
        polynomial_bound(2, 0.1, 0.4, 1.0, 1.0)


@given(p=st.floats(1.2, 5), eta=st.floats(1e-3, 1), lam=st.floats(0.1, 3), C=st.floats(0.1, 5),
       CN=st.floats(0.1, 5))
def test_z_star_is_the_minimum_of_g(p, eta, lam, C, CN):
    b = polynomial_bound(p, eta, lam, 0.5 * lam, C, CN)
    h = 1e-6 * b.z_star
    assert b.g(b.z_star) <= min(b.g(b.z_star - h), b.g(b.z_star + h)) + 1e-12 * max(1, abs(b.g_star))
    if b.has_root:
        assert 0 < b.root < b.z_star


def test_dissipative_bound_examples():
    b = dissipative_bound(2, 0.1, 0.1, 1.0, 1.0, 1.0)
    assert b.L == 2.0 and b.h_at_L == pytest.approx(-0.4)
    assert b.certified and b.comparison == pytest.approx(0.6)
    assert b.root == pytest.approx((0.9 - np.sqrt(0.41)) / 0.2, abs=1e-12)
    loose = dissipative_bound(2, 1.0, 0.5, 1.0, 1.0, 1.0)
    assert loose.root is None and not loose.certified


def test_dissipative_coefficients_and_hypotheses():
    a_pm1, a_p = dissipative_coefficients(1.0, 3, 0.1, 0.5, 0.2, 2.0)
    assert a_pm1 == pytest.approx(2.0 / 0.7)
    assert a_p == pytest.approx(1 / 0.7 * (1 / 1.4 + 1 / 0.7))
    assert dissipative_rates_ok(3, 0.1, 0.5, 0.2)
    # quadratic case with lambda_M <= lambda_0 can never satisfy both conditions
    assert not dissipative_rates_ok(2, 0.1, 0.1, 0.2)
    with pytest.raises(HypothesisError):
        dissipative_coefficients(1.0, 2, 0.1, 0.1, 0.2, 1.0)


def test_damping_integral_closed_form():
    t = np.linspace(0, 2, 2001)
    got = damping_integral(t, np.ones_like(t), 0.5)
    assert np.allclose(got, (1 - np.exp(-0.5 * t)) / 0.5, atol=1e-6)


def test_damping_zero_solution_and_linear_flow():
    grid = SpatialGrid(4, 32)
    zero = fourier_mode(grid, 0, 0, amplitude=0.0)
    traj = nonlinear_evolve(kdvks_operator(0.2), Nonlinearity("advective"), zero, 1.0, 1.0, 0.1)
    fit = damping_check(traj, 0.3)
    assert fit.C == 0 and fit.residual == 0
    u0 = fourier_mode(grid, 1, 1)
    heat = nonlinear_evolve(heat_operator(), Nonlinearity("none"), u0, 1.0, 2.0, 0.01)
    assert damping_check(heat, 0.1).C == 0
    with pytest.raises(ConfigurationError):
        damping_check(heat, 0.0)


def test_damping_failure_when_constant_explodes():
    grid = SpatialGrid(4, 32)
    traj = nonlinear_evolve(heat_operator(shift=2.0), Nonlinearity("none"),
                            fourier_mode(grid, 3, 0), 1.0, 1.0, 0.01)
    with pytest.raises(DampingFailure):
        damping_check(traj, 5.0, cap=1e-3)


def test_rho_is_monotone():
    grid = SpatialGrid(4, 32)
    traj = nonlinear_evolve(kdvks_operator(0.3), Nonlinearity("advective"),
                            fourier_mode(grid, 0, 2, amplitude=0.3), 1.0, 3.0, 0.01)
    rho = rho_series(traj, 0.05)
    assert np.all(np.diff(rho) >= 0)
    assert rho[0] == pytest.approx(traj.l2[0])


@pytest.fixture(scope="module")
def kdvks_setup():
    op = kdvks_operator(0.4)
    s = bloch_spectrum(op, XiGrid.for_grid(GRID), 15)
    u0 = fourier_mode(GRID, 1, 3)
    u0 = u0.with_values(2 * u0.values.real)
    u0 = u0 * (1 / u0.l2)
    return op, s, u0, lambda_M(u0, s)


def test_growth_sandwich_for_single_mode(kdvks_setup):
    op, s, u0, rep = kdvks_setup
    diag = fit_growth_sandwich(op, u0, rep, rep.lambda_m - 0.01, 40.0)
    assert diag.holds
    assert diag.r == pytest.approx(rep.lambda_m, abs=1e-8)
    assert diag.R == pytest.approx(rep.lambda_m, abs=1e-8)
    with pytest.raises(ConfigurationError):
        fit_growth_sandwich(op, u0, rep, rep.lambda_m + 0.1, 40.0)


def test_instability_experiment_and_eta_guard(kdvks_setup):
    op, _, u0, rep = kdvks_setup
    nl = Nonlinearity("power", 2.0, 1.0)
    verdict = instability_experiment(op, nl, u0, 0.05, [1e-2, 1e-3], rep, dt=0.05)
    assert verdict.unstable and verdict.epsilon > 0
    assert all(r.norm_at_T >= verdict.epsilon for r in verdict.runs)
    assert verdict.spread < 1.1
    with pytest.raises(EtaTooLargeError):
        instability_experiment(op, nl, u0, 0.3, [1e-1], rep, dt=0.05)


def test_unmet_hypotheses_short_circuit(kdvks_setup):
    op, s, _, _ = kdvks_setup
    stable = fourier_mode(GRID, 2, 0)
    rep = lambda_M(stable, s)
    v = instability_experiment(op, Nonlinearity("power", 2.0, 1.0), stable, 0.05, [1e-3], rep, 0.05)
    assert v.status == "hypotheses_unmet" and not v.unstable
