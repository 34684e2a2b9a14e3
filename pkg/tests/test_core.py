import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramanmem.core import (BeamGeometry, EnsembleState, FieldEnvelope, PhysicalConfig,
                           ProtocolTimeline, ReducedUnits, build_velocity_grid,
                           spectral_fwhm, velocity_grid_for)
from ramanmem.errors import ConfigurationError, ResolutionError, UndefinedQuantityError

K_OPT = 2 * math.pi / 780e-9


def physical(**kw):
    base = dict(delta1=2e10, omega2=1e9, alpha0=10.0, u=1e9 / K_OPT, length=0.2, k=K_OPT,
                omega1_peak=1e6)
    base.update(kw)
    return PhysicalConfig(**base)


def test_light_shift_compensation_cancels_raman_detuning():
    p = physical()
    assert p.light_shift == pytest.approx(1e9 ** 2 / 2e10)
    assert p.raman_detuning == 0.0
    assert p.epsilon == pytest.approx(0.05)
    assert physical(delta2=2e10).raman_detuning == pytest.approx(-p.light_shift)


def test_adiabaticity_violation_is_named():
    issues = physical(delta1=5e9).issues()
    assert any("adiabaticity" in i for i in issues)
    with pytest.raises(ConfigurationError):
        physical(delta1=5e9).check()


def test_all_physical_issues_reported_together():
    issues = physical(alpha0=-1, u=0, gamma_ac=-1).issues()
    assert len(issues) >= 3


@given(st.floats(1e-4, math.pi))
def test_two_photon_wavenumber(theta):
    g = BeamGeometry(theta, K_OPT)
    assert g.K == pytest.approx(2 * K_OPT * math.sin(theta / 2), rel=1e-14)
    assert 0 < g.K <= 2 * K_OPT * (1 + 1e-15)


@pytest.mark.parametrize("theta", [0.0, -0.1, 3.2])
def test_angle_out_of_range(theta):
    with pytest.raises(ConfigurationError):
        BeamGeometry(theta, K_OPT)


def test_timeline_echo_and_pi_bandwidth_condition():
    tl = ProtocolTimeline(t1=0, t2=1e-6, t3=3e-6, tau_p=1e-7, tau_pi=1.8e-8)
    assert tl.echo_time == pytest.approx(4e-6)
    assert tl.t12 == pytest.approx(1e-6) and tl.t23 == pytest.approx(2e-6)
    issues = tl.issues(delta_s=4 * math.log(2) / 1e-7)
    assert any("pi-pulse bandwidth" in i for i in issues)
    assert tl.issues(delta_s=1e6) == []


def test_timeline_ordering_and_overlap_reported():
    tl = ProtocolTimeline(t1=0, t2=5e-8, t3=4e-8, tau_p=1e-7, tau_pi=1e-9)
    issues = tl.issues()
    assert any("t1 < t2 < t3" in i for i in issues)
    assert any("signal duration" in i for i in issues)


def test_grid_weights_and_characteristic_function():
    grid = build_velocity_grid(300.0, 64, "hermite", max_ku_tau=6.0)
    assert grid.weights.sum() == pytest.approx(1.0, abs=1e-14)
    K = 1e6
    tau = np.linspace(0, 6 / (K * 300.0), 50)
    ref = np.exp(-(K * 300.0 * tau) ** 2 / 4)
    assert np.max(np.abs(grid.characteristic(K, tau) - ref)) < 1e-10


def test_hermite_grid_rejects_long_phase_windows():
    with pytest.raises(ResolutionError, match="residual"):
        build_velocity_grid(300.0, 64, "hermite", max_ku_tau=60.0)


def test_too_few_nodes():
    with pytest.raises(ConfigurationError):
        build_velocity_grid(300.0, 4)


@settings(max_examples=20, deadline=None)
@given(st.floats(6.0, 400.0))
def test_adaptive_grid_meets_tolerance(max_ku_tau):
    grid = velocity_grid_for(300.0, max_ku_tau, 1e-6)
    assert grid.characteristic_residual(max_ku_tau) <= 1e-6


def test_gaussian_spectral_width():
    tau = 1e-7
    t = np.linspace(-5 * tau, 5 * tau, 4001)
    a = np.exp(-2 * math.log(2) * (t / tau) ** 2)
    assert spectral_fwhm(t, a) == pytest.approx(4 * math.log(2) / tau, rel=1e-3)


def test_zero_envelope_bandwidth_undefined():
    with pytest.raises(UndefinedQuantityError):
        spectral_fwhm(np.arange(10.0), np.zeros(10))
    env = FieldEnvelope(t=np.arange(10.0), amplitude=np.zeros((1, 10)))
    assert math.isnan(env.bandwidth)


def test_envelope_energy_and_shape_check():
    t = np.linspace(0, 1, 11)
    env = FieldEnvelope(t=t, amplitude=np.ones((1, 11)))
    assert env.energy() == pytest.approx(11 * 0.1)  # rectangle rule over the samples
    with pytest.raises(ConfigurationError):
        FieldEnvelope(t=t, amplitude=np.ones((2, 5)))


def test_ensemble_population_integral():
    grid = build_velocity_grid(300.0, 16, "hermite", 1.0)
    z = np.linspace(0, 2, 5)
    st_ = EnsembleState.empty(z, grid).replace(ac={1: np.full((5, 16), 0.1 + 0j)})
    assert st_.integrated(st_.population()) == pytest.approx(0.01 * 2)
    assert st_.max_coherence() == pytest.approx(0.1)


def test_reduced_units_round_trip():
    units = ReducedUnits(ku=1e8, alpha_r=10.0, u=200.0)
    assert units.time(1e-8) == pytest.approx(1.0)
    assert units.length(0.1) == pytest.approx(1.0)
    assert units.velocity(200.0) == pytest.approx(1.0)
    assert units.rabi(1e8) == pytest.approx(1.0)


def test_reference_quadrature_examples():
    grid = build_velocity_grid(1.0, 64, "hermite", max_ku_tau=2.0)
    assert grid.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert abs(grid.characteristic(1.0, 2.0) - math.exp(-1.0)) <= 1e-6


@settings(max_examples=30, deadline=None)
@given(st.floats(1e4, 1e7), st.floats(50.0, 1000.0), st.floats(0.0, 1.0))
def test_characteristic_function_property(K, u, frac):
    grid = build_velocity_grid(u, 64, "hermite", max_ku_tau=6.0)
    tau = frac * 6.0 / (K * u)
    ref = math.exp(-(K * u * tau) ** 2 / 4)
    assert abs(grid.characteristic(K, tau) - ref) <= 1e-6
