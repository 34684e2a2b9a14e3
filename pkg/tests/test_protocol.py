import hashlib
import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

from ramanmem.errors import ConfigurationError
from ramanmem.protocol import (SolverOptions, TimingWarning, make_signal,
                               relative_difference, run_protocol)

from conftest import scenario, simulate


def digest(env):
    return hashlib.sha256(np.ascontiguousarray(env.amplitude).tobytes()).hexdigest()


def test_linear_response_scale_invariance(broadband_run):
    sc, res = broadband_run
    sc2 = scenario(physical__optical_depth=2.0, signal__peak=2e6)
    res2 = simulate(sc2)
    assert res2.retrieved_energy_fraction == pytest.approx(res.retrieved_energy_fraction,
                                                           rel=1e-12)
    np.testing.assert_allclose(res2.output.amplitude, 2 * res.output.amplitude,
                               rtol=1e-12, atol=1e-12 * np.max(np.abs(res.output.amplitude)))


def test_frozen_phase_gives_identical_read_out(broadband_run):
    sc, res = broadband_run
    longer = simulate(scenario(physical__optical_depth=2.0, timeline__t23=2 * sc.timeline.t23))
    assert digest(longer.output) == digest(res.output)


def test_stage_sequence_and_bookkeeping(broadband_run):
    sc, res = broadband_run
    assert list(res.snapshots) == ["stored", "frozen", "reversed", "read-out", "retrieved"]
    assert set(res.snapshots["frozen"].ad) == {0}
    assert -1 in res.snapshots["reversed"].ac
    assert res.stored_fraction_population == pytest.approx(res.stored_fraction, rel=1e-3)
    assert res.echo_time == pytest.approx(sc.timeline.t3 + sc.timeline.t12)
    assert res.mirror_overlap > 0.999


def test_partial_transfer_scales_read_out(broadband_run):
    sc, res = broadband_run
    half = simulate(sc, replace(sc.options, theta2=math.pi / 2))
    assert half.retrieved_energy_fraction == pytest.approx(
        0.5 * res.retrieved_energy_fraction, rel=1e-9)
    none = simulate(sc, replace(sc.options, theta3=0.0))
    assert none.retrieved_energy_fraction == 0.0


def test_finite_pulses_close_to_impulsive(broadband_run):
    sc, res = broadband_run
    fin = simulate(sc, replace(sc.options, pi_mode="finite"))
    assert relative_difference(fin.output, res.output) < 1e-2
    gauss = simulate(sc, replace(sc.options, pi_mode="finite", pi_shape="gaussian"))
    assert gauss.retrieved_energy_fraction == pytest.approx(res.retrieved_energy_fraction,
                                                            rel=2e-2)


def test_decay_conventions_agree_without_decay(broadband_run):
    sc, res = broadband_run
    em = simulate(sc, replace(sc.options, decay_convention="emission"))
    assert em.retrieved_energy_fraction == pytest.approx(res.retrieved_energy_fraction,
                                                         rel=1e-9)


def test_emission_convention_tracks_echo_decay():
    sc = scenario(physical__optical_depth=2.0, physical__gamma_ac=2e4, physical__gamma_ad=2e4)
    echo = simulate(sc)
    em = simulate(sc, replace(sc.options, decay_convention="emission"))
    assert em.retrieved_energy_fraction == pytest.approx(echo.retrieved_energy_fraction,
                                                         rel=1e-2)
    assert em.retrieved_energy_fraction != echo.retrieved_energy_fraction


def test_local_storage_mode_runs(broadband_run):
    sc, res = broadband_run
    loc = simulate(sc, replace(sc.options, storage_mode="local"))
    assert loc.transmitted_fraction == pytest.approx(math.exp(-2.0), rel=1e-9)
    assert loc.retrieved_energy_fraction == pytest.approx(res.retrieved_energy_fraction,
                                                          rel=3e-2)


@pytest.mark.parametrize("shape", ["square", "two-hump"])
def test_other_shapes_are_restored(shape):
    # the square pulse has the wider spectrum and needs a shorter pi pulse
    sc = scenario(physical__optical_depth=2.0, signal__shape=shape, timeline__tau_pi=1e-9)
    res = simulate(sc)
    assert res.mirror_overlap > 0.99


def test_short_separation_warns():
    sc = scenario(physical__optical_depth=2.0)
    tl = replace(sc.timeline, t2=sc.timeline.t1 + 8 * sc.timeline.tau_p,
                 t3=sc.timeline.t1 + 20 * sc.timeline.tau_p, control_lead=4 * sc.timeline.tau_p)
    with pytest.warns(TimingWarning):
        run_protocol(sc.physical, sc.geometry, tl, sc.signal, sc.options)


def test_signal_overlapping_pulse_rejected():
    sc = scenario(physical__optical_depth=2.0)
    tl = replace(sc.timeline, t2=sc.timeline.t1 + 2 * sc.timeline.tau_p,
                 t3=sc.timeline.t1 + 30 * sc.timeline.tau_p, control_lead=1.5 * sc.timeline.tau_p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TimingWarning)
        with pytest.raises(ConfigurationError, match="overlaps"):
            run_protocol(sc.physical, sc.geometry, tl, sc.signal, sc.options)


def test_invalid_options_reported_together():
    opts = SolverOptions(storage_mode="x", pi_mode="y", signal_direction=0)
    assert len(opts.issues()) == 3


def test_signal_sampling():
    sig = make_signal("gaussian", 0.0, 1e-7, 1e6)
    assert sig.dt <= 1e-7 / 100 * (1 + 1e-12)
    assert sig.dt <= 1 / (20 * sig.bandwidth) * (1 + 1e-12)
    assert np.argmax(np.abs(sig.amplitude[0])) == len(sig.t) // 2
    with pytest.raises(ConfigurationError):
        make_signal("triangle", 0.0, 1e-7, 1e6)


def test_unit_rescaling_leaves_dimensionless_outputs(broadband_run):
    # stretch every time by 2 and slow every rate by 2 (k fixed, so u halves)
    sc, res = broadband_run
    scaled = scenario(physical__optical_depth=2.0, physical__ku=0.5e9, physical__delta1=1e10,
                      physical__omega2=0.5e9, physical__gamma_ab=1e7, signal__peak=0.5e6,
                      signal__duration=200e-9, timeline__t12=2e-6, timeline__t23=4e-6,
                      timeline__tau_pi=4e-9, physical__length=0.1)
    res2 = simulate(scaled)
    for name in ("transmitted_fraction", "retrieved_energy_fraction", "residual_eta",
                 "mirror_overlap", "stored_fraction_population"):
        assert getattr(res2, name) == pytest.approx(getattr(res, name), rel=1e-12), name


def test_grid_convergence_under_halving(narrow_run):
    sc, res = narrow_run
    fine = simulate(sc, replace(sc.options, storage_dz=1 / 80, dt_fraction=1 / 40))
    assert fine.retrieved_energy_fraction == pytest.approx(res.retrieved_energy_fraction,
                                                           rel=5e-3)


def test_mis_set_transfer_area_flagged(broadband_run):
    from ramanmem.oracle import compare, predict
    sc, res = broadband_run
    off = simulate(sc, replace(sc.options, theta2=0.9 * math.pi))
    p = predict(sc.physical, sc.geometry, sc.timeline, sc.signal)
    flag = compare(off, p).flags[0]
    assert flag["expected_scaling"] == pytest.approx(math.sin(0.45 * math.pi) ** 2)
    assert flag["expected_scaling"] == pytest.approx(0.9755, abs=1e-4)
    assert flag["consistent"]
