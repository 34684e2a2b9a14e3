"""Polarization assembly and the storage / retrieval envelope solvers.

Both solvers work in reduced units (time x K u, length x alpha_R, Rabi
frequencies / K u) on the co-moving time of the travelling signal: t - z/c for
the forward storage pass and t + z/c for the backward read-out.  In these
frames every z/c offset cancels, so c only relabels laboratory times.

Reduced equations, for grating harmonic n and propagation direction d
(distance s travelled along d):

    d(sigma_j)/dt = -(i n x_j + gamma) sigma_j - i eps f*
    df/ds         = i / (2 sqrt(pi) eps*) * conj(<sigma>)

with x_j = v_j/u and <.> the velocity average.  Only n = d is phase matched;
in the broadband limit this reduces to df/ds = -f/2 on storage.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .core import SQRT_PI, EnsembleState, FieldEnvelope, ReducedUnits, VelocityGrid
from .dynamics import free_evolve, response_kernel
from .errors import ConfigurationError, ResolutionError, UndefinedQuantityError

STORAGE_DZ = 1 / 40      # in 1/alpha_R
RETRIEVAL_DZ = 1 / 20    # in 1/alpha_R
DT_BANDWIDTH = 1 / 20    # dt <= DT_BANDWIDTH / delta_s


class DistortionWarning(UserWarning):
    """Signal bandwidth is comparable to the Doppler width K u."""


@dataclass(frozen=True)
class Medium:
    """Raman-active medium as seen by the signal mode.

    ``alpha_r`` is the Raman absorption coefficient (1/m), ``K`` the two-photon
    wave number, ``u`` the most probable speed and ``epsilon`` = omega2/delta1.
    ``c`` only converts co-moving times to laboratory times.
    """

    alpha_r: float
    length: float
    K: float
    u: float
    epsilon: complex
    c: float = math.inf

    @property
    def ku(self) -> float:
        return self.K * self.u

    @property
    def optical_depth(self) -> float:
        return self.alpha_r * self.length

    @property
    def units(self) -> ReducedUnits:
        return ReducedUnits(ku=self.ku, alpha_r=self.alpha_r, u=self.u)


@dataclass(frozen=True, eq=False)
class PolarizationField:
    """Normalised polarization Ku conj(<sigma>) / (sqrt(pi) eps*), rad/s.

    The normalisation makes the broadband storage polarization equal to
    i * omega1; ``component`` says which source produced it.
    """

    t: np.ndarray
    z: np.ndarray
    values: np.ndarray
    component: str
    harmonic: int

    def locality_error(self, omega1) -> float:
        """Relative L2 distance to the broadband form i * omega1."""
        ref = 1j * np.asarray(omega1)
        return float(np.linalg.norm(self.values - ref) / np.linalg.norm(ref))


def _normalise(avg: np.ndarray, medium: Medium) -> np.ndarray:
    return medium.ku * np.conj(avg) / (SQRT_PI * np.conj(medium.epsilon))


def assemble_polarization(state: EnsembleState, medium: Medium, t, harmonic: int = 1,
                          which: str = "ac") -> PolarizationField:
    """Polarization radiated by freely evolving coherences.

    Each class keeps its value at ``state.time`` and then rotates with its
    Doppler phase, so the velocity average carries the full history.
    """
    t = np.asarray(t, dtype=float)
    table = state.ac if which == "ac" else state.ad
    if harmonic not in table or not np.any(table[harmonic]):
        return PolarizationField(t, state.z, np.zeros((len(state.z), len(t)), complex),
                                 "free", harmonic)
    kv = state.grid.doppler(medium.K)
    phase = np.exp(-1j * harmonic * np.multiply.outer(kv, t - state.time))
    avg = (table[harmonic] * state.grid.weights) @ phase
    return PolarizationField(t, state.z, _normalise(avg, medium), "free", harmonic)


def storage_polarization(envelope: FieldEnvelope, medium: Medium, grid: VelocityGrid,
                         iz: int = 0) -> PolarizationField:
    """Polarization driven by the envelope at one position (no depletion)."""
    units = medium.units
    h = envelope.dt * units.ku
    f = envelope.amplitude[iz] / units.ku
    G = _velocity_kernel(grid.nodes / grid.u, grid.weights, 1, 0.0, h, len(f))
    avg = -1j * medium.epsilon * _causal_conv(np.conj(f), G)
    return PolarizationField(envelope.t, envelope.z[iz:iz + 1],
                             _normalise(avg, medium)[None, :], "storage", 1)


# reduced-unit kernels ------------------------------------------------------

def _velocity_kernel(x, w, harmonic, gamma, h, n):
    lam = -(1j * harmonic * x + gamma)
    return w @ response_kernel(lam, h, n)


def _causal_conv(u, G):
    n = u.shape[-1]
    nfft = sfft.next_fast_len(2 * n)
    return sfft.ifft(sfft.fft(u, nfft) * sfft.fft(G, nfft))[..., :n]


class _Convolver:
    """Fixed causal convolution with a precomputed kernel spectrum."""

    def __init__(self, G):
        self.n = len(G)
        self.nfft = sfft.next_fast_len(2 * self.n)
        self.Ghat = sfft.fft(G, self.nfft)

    def __call__(self, f):
        return sfft.ifft(sfft.fft(f, self.nfft) * self.Ghat)[: self.n]


def _rk4_march(f0, deriv, n_steps, ds, source=None):
    """RK4 in s; ``source(i, half)`` returns the source at step i (+1/2 if half)."""
    f = np.array(f0, dtype=complex)
    out = [f]
    for i in range(n_steps):
        s0 = source(2 * i) if source else 0.0
        s1 = source(2 * i + 1) if source else 0.0
        s2 = source(2 * i + 2) if source else 0.0
        k1 = deriv(f) + s0
        k2 = deriv(f + ds / 2 * k1) + s1
        k3 = deriv(f + ds / 2 * k2) + s1
        k4 = deriv(f + ds * k3) + s2
        f = f + ds / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(f)
    return np.array(out)


def storage_reduced(f0, h, x, w, depth, n_fine, gamma=0.0, mode="resolved"):
    """Forward storage pass in reduced units.

    Returns (fields on the fine z nodes, stored kernel-response snapshot
    sum_k kernel[N-1-k] conj(f_k) per node and class).  The caller multiplies
    the snapshot by -i eps to get the coherence.
    """
    f0 = np.asarray(f0, dtype=complex)
    n = len(f0)
    zeta = np.linspace(0.0, depth, n_fine)
    lam = -(1j * x + gamma)
    kern = response_kernel(lam, h, n)
    if depth == 0:
        F = np.tile(f0, (n_fine, 1))
    elif mode == "local":
        F = f0[None, :] * np.exp(-zeta / 2)[:, None]
    elif mode == "resolved":
        conv = _Convolver(np.conj(w @ kern))
        deriv = lambda f: -conv(f) / (2 * SQRT_PI)  # noqa: E731
        F = _rk4_march(f0, deriv, n_fine - 1, zeta[1] - zeta[0])
    else:
        raise ConfigurationError(f"unknown storage mode {mode!r}")
    snap = np.conj(F) @ kern[:, ::-1].T
    return F, snap


def retrieval_reduced(sig0, h, n, x, w, harmonic, eps, depth, gamma=0.0):
    """Read-out pass in reduced units, travelling along the signal direction.

    ``sig0`` (fine nodes ordered along the travel direction, classes) is the
    phase-matched harmonic at the start of the window.  Returns (field on
    coarse nodes in travel order, coherence at the end of the window on the
    same nodes).
    """
    sig0 = np.asarray(sig0, dtype=complex)
    n_fine = sig0.shape[0]
    lam = -(1j * harmonic * x + gamma)
    tt = np.arange(n) * h
    kern = response_kernel(lam, h, n)
    n_coarse = (n_fine + 1) // 2
    if depth == 0 or eps == 0:
        F = np.zeros((n_coarse, n), complex)
    else:
        avg_src = (sig0 * w) @ np.exp(np.multiply.outer(lam, tt))
        src = 1j / (2 * SQRT_PI * np.conj(eps)) * np.conj(avg_src)
        conv = _Convolver(np.conj(w @ kern))
        deriv = lambda f: -conv(f) / (2 * SQRT_PI)  # noqa: E731
        ds = 2 * depth / (n_fine - 1)
        F = _rk4_march(np.zeros(n, complex), deriv, n_coarse - 1, ds,
                       source=lambda i: src[i])
    sig_c = sig0[::2] * np.exp(lam * tt[-1])[None, :]
    sig_end = sig_c - 1j * eps * (np.conj(F) @ kern[:, ::-1].T)
    return F, sig_end


# SI-level solvers ----------------------------------------------------------

def _fine_node_count(depth, dz_reduced):
    m = max(1, int(math.ceil(depth / (2 * dz_reduced) - 1e-9)))
    return 2 * m + 1


def propagate_storage(envelope: FieldEnvelope, medium: Medium, grid: VelocityGrid,
                      mode: str = "resolved", dz: float | None = None,
                      gamma_ac: float = 0.0, check_convergence: bool = False
                      ) -> tuple[FieldEnvelope, EnsembleState]:
    """Forward pass of the signal through the medium with the control on.

    Returns the envelope on the z grid (co-moving time t - z/c) and the a-c
    coherence (harmonic +1) at the last time sample.  ``mode="local"`` uses
    the broadband attenuation exp(-alpha_R z / 2); ``"resolved"`` solves the
    coupled field/velocity-class equations.
    """
    if envelope.direction != 1:
        raise ConfigurationError("storage expects a forward (+k1) signal")
    units = medium.units
    ds = envelope.bandwidth
    if math.isfinite(ds):
        if ds >= medium.ku:
            warnings.warn("signal bandwidth %.3g rad/s >= K u = %.3g rad/s: storage "
                          "will distort the pulse" % (ds, medium.ku),
                          DistortionWarning, stacklevel=2)
        elif mode == "local" and ds > medium.ku / 3:
            warnings.warn("local storage model used with delta_s > K u / 3",
                          DistortionWarning, stacklevel=2)
        if envelope.dt > DT_BANDWIDTH / ds * (1 + 1e-9):
            raise ResolutionError("time step %.3g s exceeds 1/(20 delta_s) = %.3g s"
                                  % (envelope.dt, DT_BANDWIDTH / ds))
    depth = medium.optical_depth
    if dz is None:
        n_fine = _fine_node_count(depth, STORAGE_DZ)
    else:
        if depth > 0 and dz * medium.alpha_r > 1 / 20 * (1 + 1e-9):
            raise ResolutionError("dz = %.3g m exceeds 1/(20 alpha_R) = %.3g m"
                                  % (dz, 1 / (20 * medium.alpha_r)))
        n_fine = _fine_node_count(medium.length, dz)
    h = envelope.dt * units.ku
    x = grid.nodes / grid.u
    gamma = gamma_ac / units.ku
    f0 = envelope.amplitude[0] / units.ku
    F, snap = storage_reduced(f0, h, x, grid.weights, depth, n_fine, gamma, mode)
    if check_convergence and mode == "resolved" and depth > 0:
        F2, _ = storage_reduced(f0, h, x, grid.weights, depth, 2 * n_fine - 1, gamma, mode)
        e1 = np.sum(np.abs(F[-1]) ** 2)
        e2 = np.sum(np.abs(F2[-1]) ** 2)
        if abs(e1 - e2) > 0.01 * max(e2, 1e-300):
            raise ResolutionError("transmitted energy changes by %.3g%% when dz is halved"
                                  % (100 * abs(e1 - e2) / e2))
    z = np.linspace(0.0, medium.length, n_fine)
    out = FieldEnvelope(t=envelope.t, amplitude=F * units.ku, z=z, direction=1,
                        carrier=envelope.carrier)
    sigma = -1j * medium.epsilon * snap
    state = EnsembleState(z=z, grid=grid, ac={1: sigma}, ad={},
                          pop_c=np.zeros(sigma.shape), pop_d=np.zeros(sigma.shape),
                          time=float(envelope.t[-1]), stage="stored")
    return out, state


def _check_fine_grid(z):
    if len(z) < 3 or len(z) % 2 == 0:
        raise ConfigurationError("read-out needs an odd number (>= 3) of z nodes so "
                                 "that coarse steps have midpoints")
    d = np.diff(z)
    if not np.allclose(d, d[0], rtol=1e-9, atol=0):
        raise ConfigurationError("read-out needs a uniform z grid")


def propagate_retrieval(state: EnsembleState, medium: Medium, t,
                        control_direction: int | None = None,
                        signal_direction: int = -1, gamma_ac: float = 0.0,
                        gamma_ad: float = 0.0, dt: float | None = None
                        ) -> tuple[FieldEnvelope, EnsembleState]:
    """Read-out pass with the control switched on over the time grid ``t``.

    The state is advanced freely from ``state.time`` to ``t[0]``.  Only the
    grating harmonic equal to the propagation direction radiates, and only
    when the signal and control directions agree; other configurations give
    an identically zero field.  The field enters with zero amplitude at the
    far face.  ``dt`` overrides the step read from ``t`` (differences of
    large absolute times lose digits).  Returns the envelope on the coarse z nodes (co-moving time
    t + d z/c) and the ensemble at ``t[-1]`` on the same nodes.
    """
    if control_direction is None:
        raise ConfigurationError("read-out control direction must be given "
                                 "(-1 for the backward control)")
    if control_direction not in (1, -1) or signal_direction not in (1, -1):
        raise ConfigurationError("directions must be +1 or -1")
    t = np.asarray(t, dtype=float)
    if len(t) < 2:
        raise ConfigurationError("read-out time grid needs at least two samples")
    h_si = t[1] - t[0] if dt is None else dt
    if state.time > t[0] + 1e-9 * abs(h_si):
        raise ConfigurationError("read-out window starts before the state time")
    _check_fine_grid(state.z)
    if t[0] > state.time:
        state = free_evolve(state, t[0] - state.time, "both", 0.0, medium.K)
    units = medium.units
    h = h_si * units.ku
    x = state.grid.nodes / state.grid.u
    w = state.grid.weights
    gamma = gamma_ac / units.ku
    n = signal_direction
    fine = state.z
    coarse = fine[::2]
    nt = len(t)
    phase_matched = control_direction == signal_direction
    sig0 = state.ac.get(n)
    if phase_matched and sig0 is not None and np.any(sig0):
        order = slice(None) if n == 1 else slice(None, None, -1)
        F, sig_end = retrieval_reduced(sig0[order], h, nt, x, w, n, medium.epsilon,
                                       medium.optical_depth, gamma)
        F, sig_end = F[order], sig_end[order]
    else:
        F = np.zeros((len(coarse), nt), complex)
        sig_end = None

    sub = state.replace(z=coarse, ac={k: a[::2] for k, a in state.ac.items()},
                        ad={k: a[::2] for k, a in state.ad.items()},
                        pop_c=state.pop_c[::2], pop_d=state.pop_d[::2])
    duration = t[-1] - t[0]
    final = free_evolve(sub, duration, "both", (gamma_ac, gamma_ad), medium.K)
    if sig_end is not None:
        ac = dict(final.ac)
        ac[n] = sig_end
        final = final.replace(ac=ac)
    final = final.replace(stage="retrieved")
    out = FieldEnvelope(t=t, amplitude=F * units.ku, z=coarse,
                        direction=signal_direction)
    return out, final


def envelope_energy(env: FieldEnvelope, iz: int) -> float:
    return env.energy(iz)


def phase_matching_check(state: EnsembleState, medium: Medium, t,
                         signal_direction: int, control_direction: int,
                         reference_state: EnsembleState | None = None) -> float:
    """Energy read out in a trial configuration over the correct one.

    The correct configuration is backward signal and backward control applied
    to ``reference_state`` (default: the same state).
    """
    ref_state = state if reference_state is None else reference_state
    ref, _ = propagate_retrieval(ref_state, medium, t, -1, -1)
    e_ref = ref.energy(0)
    if e_ref == 0:
        raise UndefinedQuantityError("the correct configuration radiates nothing")
    trial, _ = propagate_retrieval(state, medium, t, control_direction, signal_direction)
    exit_node = 0 if signal_direction == -1 else len(trial.z) - 1
    return trial.energy(exit_node) / e_ref


def _matching(stored: EnsembleState, final: EnsembleState) -> EnsembleState:
    if len(stored.z) == len(final.z) and np.allclose(stored.z, final.z):
        return stored
    if len(stored.z) == 2 * len(final.z) - 1 and np.allclose(stored.z[::2], final.z):
        return stored.replace(z=stored.z[::2], ac={k: a[::2] for k, a in stored.ac.items()},
                              ad={k: a[::2] for k, a in stored.ad.items()},
                              pop_c=stored.pop_c[::2], pop_d=stored.pop_d[::2])
    raise ConfigurationError("stored and final states live on incompatible z grids")


def residual_population(stored: EnsembleState, final: EnsembleState) -> float:
    """Fraction of the stored excitation still outside level a after read-out."""
    stored = _matching(stored, final)
    p0 = stored.integrated(stored.population())
    if p0 == 0:
        raise UndefinedQuantityError("nothing was stored; the residual fraction is 0/0")
    return final.integrated(final.population()) / p0
