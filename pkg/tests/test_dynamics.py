import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramanmem.acceptance import adiabatic_deviation
from ramanmem.core import EnsembleState, VelocityGrid, build_velocity_grid, velocity_grid_for
from ramanmem.dynamics import (LambdaSystemState, PiPulseSpec, apply_decay, drive_snapshot,
                               free_evolve, impulsive_equivalent, integrate_lambda_full,
                               integrate_storage_adiabatic, pi_pulse_integrate,
                               pi_pulse_rotate, pi_transfer_error, response_kernel)
from ramanmem.errors import ConfigurationError, ResolutionError, ValidityError

U = 300.0
K = 1e6  # K u = 3e8 rad/s


def grid(n=32):
    return build_velocity_grid(U, n, "hermite", 2.0)


def stored(values=None, g=None):
    g = g or grid()
    v = np.ones((1, len(g)), complex) if values is None else values
    return EnsembleState.empty([0.0], g).replace(ac={1: v})


def probe(velocities):
    v = np.asarray(velocities, float)
    g = VelocityGrid(nodes=v, weights=np.full(len(v), 1 / len(v)), u=U, rule="probe")
    return stored(np.ones((1, len(v)), complex), g)


@settings(max_examples=25, deadline=None)
@given(st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False),
       st.floats(1e-3, 0.5))
def test_kernel_exact_for_piecewise_linear_drive(lam, h):
    n = 40
    t = h * np.arange(n)
    b = 0.3 + 0.7j
    u = b * t  # linear drive starting from zero
    got = drive_snapshot(np.array([lam]), h, u)[0]
    T = t[-1]
    # closed form of sigma' = lam sigma + b t from sigma(0) = 0
    if abs(lam) < 1e-6:
        ref = b * T ** 2 / 2
    else:
        ref = b * (np.expm1(lam * T) / lam ** 2 - T / lam)
    assert abs(got - ref) <= 1e-10 * max(1.0, abs(ref))


def test_kernel_shape():
    assert response_kernel(np.zeros(5), 0.1, 7).shape == (5, 7)


def test_free_evolution_phase_and_decay_bookkeeping():
    st0 = stored()
    T, g = 2e-8, 1e7
    st1 = free_evolve(st0, T, "ac", g, K)
    kv = st0.grid.doppler(K)
    np.testing.assert_allclose(st1.ac[1][0], np.exp(-1j * kv * T - g * T), rtol=1e-13)
    total0 = st0.integrated(st0.population())
    assert st1.integrated(st1.population()) == pytest.approx(total0, rel=1e-13)
    assert st1.time == st0.time  # single-level evolution keeps the label


def test_decay_helper_keeps_time_and_phase():
    st1 = apply_decay(stored(), 1e6, 0.0, 1e-6)
    np.testing.assert_allclose(st1.ac[1], math.exp(-1.0), rtol=1e-14)
    assert st1.time == 0.0


def test_negative_duration_rejected():
    with pytest.raises(ConfigurationError):
        free_evolve(stored(), -1.0)


def test_pi_rotation_moves_grating_between_levels():
    st0 = stored()
    st1 = pi_pulse_rotate(st0, math.pi, direction=1)
    assert set(st1.ad) == {0}
    assert max(np.max(np.abs(a)) for a in st1.ac.values()) < 1e-15  # cos(pi/2) residue
    np.testing.assert_allclose(st1.ad[0], 1j, atol=1e-15)
    st2 = pi_pulse_rotate(st1, math.pi, direction=-1)
    assert -1 in st2.ac and np.max(np.abs(st2.ac.get(1, 0))) < 1e-15
    np.testing.assert_allclose(st2.ac[-1], -1.0, atol=1e-15)


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_rotation_conserves_population(theta, phi):
    st0 = stored().replace(pop_c=np.full((1, 32), 0.3))
    st1 = pi_pulse_rotate(st0, theta, phi, 1)
    assert st1.integrated(st1.population()) == pytest.approx(
        st0.integrated(st0.population()), rel=1e-12)


def test_echo_rephases_every_class():
    T = 5e-7  # K u T = 150: the ensemble average has fully dephased
    g = velocity_grid_for(U, 2 * K * U * T)
    st0 = stored(g=g)
    st1 = free_evolve(st0, T, "both", 0.0, K)
    assert abs(st1.ac[1][0] @ g.weights) < 1e-6
    st2 = pi_pulse_rotate(st1, math.pi, 0.0, 1)
    st3 = free_evolve(st2, 3 * T, "both", 0.0, K)  # harmonic 0: no Doppler phase
    np.testing.assert_array_equal(st3.ad[0], st2.ad[0])
    st4 = pi_pulse_rotate(st3, math.pi, 0.0, -1)
    st5 = free_evolve(st4, T, "both", 0.0, K)
    np.testing.assert_allclose(st5.ac[-1][0], -1.0, atol=1e-12)


def test_pulse_area():
    for shape in ("square", "gaussian"):
        spec = PiPulseSpec.with_area(math.pi, 2e-9, 2e10, shape)
        assert spec.area == pytest.approx(math.pi, rel=1e-12)
        s = np.linspace(-spec.window / 2, spec.window / 2, 200001)
        assert np.trapezoid(spec.two_photon_rabi(s), s) == pytest.approx(math.pi, rel=1e-6)


def test_finite_pulse_matches_rotation_without_doppler():
    spec = PiPulseSpec.with_area(math.pi, 2e-9, 2e10)
    st0 = stored()
    a = impulsive_equivalent(st0, spec, 0.0)
    b = pi_pulse_integrate(st0, spec, 0.0, spec.tau_pi / 200)
    np.testing.assert_allclose(b.ad[0], a.ad[0], atol=1e-9)
    assert b.time == pytest.approx(st0.time + spec.window)


def test_finite_pulse_error_is_first_order_in_doppler_phase():
    # a square pi pulse of duration tau leaves a class error of K v tau / pi
    tau = 1e-9
    spec = PiPulseSpec.with_area(math.pi, tau, 2e10)
    kvt = np.array([1e-3, 1e-2])
    b = pi_pulse_integrate(probe(kvt / (K * tau)), spec, K, tau / 400)
    a = impulsive_equivalent(probe(kvt / (K * tau)), spec, K)
    err = np.max([np.abs(a.ad[0] - b.ad[0])[0], np.abs(b.ac.get(1, 0 * a.ad[0]))[0]], axis=0)
    np.testing.assert_allclose(err, kvt / math.pi, rtol=0.02)


def test_pi_pulse_step_bound():
    spec = PiPulseSpec.with_area(math.pi, 2e-9, 2e10)
    with pytest.raises(ResolutionError):
        pi_pulse_integrate(stored(), spec, K, spec.tau_pi / 10)


def test_transfer_error_normalised_by_peak():
    spec = PiPulseSpec.with_area(math.pi, 1e-9, 2e10)
    e1 = pi_transfer_error(stored(), spec, K, spec.tau_pi / 50)
    e2 = pi_transfer_error(stored(5e-3 * np.ones((1, 32), complex)), spec, K,
                           spec.tau_pi / 50)
    assert e1 == pytest.approx(e2, rel=1e-9)


def test_adiabatic_storage_requires_compensated_detuning():
    t = np.linspace(0, 1e-8, 11)
    with pytest.raises(ConfigurationError, match="light shift"):
        integrate_storage_adiabatic(t, np.ones(11), 1e9, 2e10, 2e10, 0.0, grid(), K)
    out = integrate_storage_adiabatic(t, np.ones(11), 1e9, 2e10, 2e10, 0.0, grid(), K,
                                      allow_uncompensated=True)
    assert out.ac[1].shape == (1, 32)


def test_full_lambda_step_and_validity_bounds():
    v = np.array([0.0])
    st0 = LambdaSystemState.ground(v)
    with pytest.raises(ResolutionError):
        integrate_lambda_full(st0, lambda t: 1e6, 1e9, 2e10, 2e10 - 5e7, 1e7, 0.0, K,
                              1e-9, 1e-11)
    with pytest.raises(ValidityError):
        integrate_lambda_full(st0, lambda t: 1e10, 1e9, 2e10, 2e10 - 5e7, 1e7, 0.0, K,
                              1e-9, 1e-13)


def test_adiabatic_elimination_converges_linearly():
    d1, d2 = adiabatic_deviation(100.0), adiabatic_deviation(200.0)
    assert d1 <= 2e-2
    assert 2 / 1.5 <= d1 / d2 <= 2 * 1.5
