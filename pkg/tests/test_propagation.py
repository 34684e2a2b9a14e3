import math

import numpy as np
import pytest

from ramanmem.core import EnsembleState, FieldEnvelope, velocity_grid_for
from ramanmem.errors import ConfigurationError, ResolutionError, UndefinedQuantityError
from ramanmem.oracle import spectral_transmitted_fraction
from ramanmem.propagation import (DistortionWarning, Medium, assemble_polarization,
                                  phase_matching_check, propagate_retrieval,
                                  propagate_storage, residual_population,
                                  storage_polarization)
from ramanmem.protocol import medium_for

from conftest import scenario


def setup(depth=2.0, name="broadband"):
    sc = scenario(name, physical__optical_depth=depth)
    med = medium_for(sc.physical, sc.geometry)
    sig = sc.signal
    grid = velocity_grid_for(sc.physical.u, med.ku * 3 * (sig.t[-1] - sig.t[0]))
    return sc, med, sig, grid


def test_local_mode_is_beer_lambert():
    sc, med, sig, grid = setup(2.0)
    out, _ = propagate_storage(sig, med, grid, "local")
    assert out.energy(len(out.z) - 1) / out.energy(0) == pytest.approx(math.exp(-2), rel=1e-12)


@pytest.mark.parametrize("depth", [0.5, 2.0, 4.0])
def test_resolved_storage_matches_spectral_oracle(depth):
    sc, med, sig, grid = setup(depth)
    out, _ = propagate_storage(sig, med, grid)
    T = out.energy(len(out.z) - 1) / out.energy(0)
    assert T == pytest.approx(math.exp(-depth), rel=0.02)
    assert T == pytest.approx(spectral_transmitted_fraction(sig, med.ku, depth), rel=1e-3)


def test_broadband_example_transmission():
    sc, med, sig, grid = setup(2.0)
    out, _ = propagate_storage(sig, med, grid)
    assert out.energy(len(out.z) - 1) / out.energy(0) == pytest.approx(0.13534, rel=0.02)


def test_storage_dz_halving_converged():
    sc, med, sig, grid = setup(3.0)
    propagate_storage(sig, med, grid, check_convergence=True)


def test_storage_time_step_bound():
    sc, med, sig, grid = setup(2.0)
    coarse = FieldEnvelope(t=sig.t[::3], amplitude=sig.amplitude[:, ::3])
    with pytest.raises(ResolutionError, match="delta_s"):
        propagate_storage(coarse, med, grid)


def test_narrowband_distortion_warning():
    sc, med, sig, grid = setup(2.0)
    slow = Medium(alpha_r=med.alpha_r, length=med.length, K=med.K / 20, u=med.u,
                  epsilon=med.epsilon)
    with pytest.warns(DistortionWarning):
        propagate_storage(sig, slow, grid)


def test_storage_polarization_broadband_locality():
    """Broadband storage polarization equals i * omega1 within 2% at delta_s <= K u / 10."""
    sc, med, sig, grid = setup(2.0)
    assert sig.bandwidth <= med.ku / 10 * (1 + 1e-9)
    pol = storage_polarization(sig, med, grid)
    assert pol.locality_error(sig.amplitude[0]) <= 0.02


def test_storage_polarization_first_order_dispersion():
    # leading correction to locality is the dispersive term (2/sqrt(pi)) omega / K u
    for name in ("broadband", "default"):
        sc, med, sig, grid = setup(2.0, name)
        pol = storage_polarization(sig, med, grid)
        a = sig.amplitude[0]
        spec = np.abs(np.fft.fft(a, 1 << 16)) ** 2
        w = 2 * np.pi * np.fft.fftfreq(1 << 16, sig.dt)
        rms = math.sqrt(np.sum(w ** 2 * spec) / np.sum(spec))
        expected = 2 / math.sqrt(math.pi) * rms / med.ku
        assert pol.locality_error(a) == pytest.approx(expected, rel=0.05)


def test_retrieval_needs_control_direction(broadband_run):
    sc, res = broadband_run
    med = medium_for(sc.physical, sc.geometry)
    st = res.snapshots["read-out"]
    with pytest.raises(ConfigurationError, match="control direction"):
        propagate_retrieval(st, med, res.output.t)


def test_retrieval_reproduces_protocol_output(broadband_run):
    sc, res = broadband_run
    med = medium_for(sc.physical, sc.geometry)
    out, final = propagate_retrieval(res.snapshots["read-out"], med, res.output.t, -1, -1,
                                     dt=sc.signal.dt)
    np.testing.assert_array_equal(out.amplitude, res.output.amplitude)
    assert final.stage == "retrieved"


@pytest.mark.parametrize("sig_dir, ctl_dir", [(1, 1), (1, -1), (-1, 1)])
def test_unmatched_read_out_is_dark(broadband_run, sig_dir, ctl_dir):
    sc, res = broadband_run
    med = medium_for(sc.physical, sc.geometry)
    ratio = phase_matching_check(res.snapshots["read-out"], med, res.output.t, sig_dir, ctl_dir)
    assert ratio < 1e-20  # only the cos(pi/2) residue of the pulses can radiate


def test_free_polarization_rephases_at_echo(broadband_run):
    sc, res = broadband_run
    med = medium_for(sc.physical, sc.geometry)
    st = res.snapshots["read-out"]
    te, tau = sc.timeline.echo_time, sc.timeline.tau_p
    pol = assemble_polarization(st, med, np.array([te, te + 4 * tau]), harmonic=-1)
    peak, late = np.abs(pol.values[0, 0]), np.abs(pol.values[0, 1])
    assert late < 1e-3 * peak


def test_residual_population_undefined_when_nothing_stored(broadband_run):
    sc, res = broadband_run
    empty = EnsembleState.empty(res.final_state.z, res.final_state.grid)
    with pytest.raises(UndefinedQuantityError):
        residual_population(empty, res.final_state)


def test_retrieval_rejects_even_grid(broadband_run):
    sc, res = broadband_run
    med = medium_for(sc.physical, sc.geometry)
    st = res.snapshots["read-out"]
    sub = st.replace(z=st.z[:-1], ac={k: a[:-1] for k, a in st.ac.items()},
                     ad={k: a[:-1] for k, a in st.ad.items()},
                     pop_c=st.pop_c[:-1], pop_d=st.pop_d[:-1])
    with pytest.raises(ConfigurationError, match="odd"):
        propagate_retrieval(sub, med, res.output.t, -1)


def test_zero_state_radiates_nothing(broadband_run):
    sc, res = broadband_run
    med = medium_for(sc.physical, sc.geometry)
    st = res.snapshots["read-out"]
    empty = EnsembleState.empty(st.z, st.grid, time=st.time)
    out, _ = propagate_retrieval(empty, med, res.output.t, -1)
    assert not np.any(out.amplitude)


def test_correct_configuration_ratio_is_one(broadband_run):
    sc, res = broadband_run
    med = medium_for(sc.physical, sc.geometry)
    assert phase_matching_check(res.snapshots["read-out"], med, res.output.t, -1, -1) == 1.0
