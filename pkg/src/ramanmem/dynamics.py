"""Per-velocity-class evolution of the Raman coherences.

Covers the signal-driven build-up (adiabatic and full three-level paths), free
Doppler evolution with decay, and the c-d Raman pi pulses (impulsive map and
finite-duration integration).  Coherence arrays carry the grating harmonic
convention described in :mod:`ramanmem.core`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EnsembleState, VelocityGrid
from .errors import ConfigurationError, ResolutionError, ValidityError

LAMBDA_PERTURBATIVE_BOUND = 0.3
# decay inside a pi pulse is dropped when gamma * tau_pi is below this
PI_DECAY_NEGLIGIBLE = 1e-3


# exponential-integrator helpers -------------------------------------------

def phi1(z):
    """(exp(z) - 1) / z with a series branch near zero."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    out = np.expm1(zs) / zs
    ser = 1 + z / 2 + z ** 2 / 6 + z ** 3 / 24
    return np.where(small, ser, out)


def phi2(z):
    """(exp(z) - 1 - z) / z**2 with a series branch near zero."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    out = (np.expm1(zs) - zs) / zs ** 2
    ser = 0.5 + z / 6 + z ** 2 / 24 + z ** 3 / 120 + z ** 4 / 720
    return np.where(small, ser, out)


def response_kernel(lam, h: float, n: int) -> np.ndarray:
    """Discrete impulse response of d(sigma)/dt = lam*sigma + u(t).

    The drive u is taken piecewise linear between samples spaced ``h`` and
    ramping up from zero over the step before u[0]; then
    sigma_k = sum_m kernel[..., m] * u[k - m] exactly for sigma = 0 before the
    ramp.
    ``lam`` may be an array (one rate per velocity class); the kernel gets a
    trailing axis of length ``n``.
    """
    lam = np.asarray(lam, dtype=complex)
    z = lam * h
    p1 = phi1(z)
    p2 = phi2(z)
    a = h * (p1 - p2)
    b = h * p2
    m = np.arange(n)
    decay = np.exp(np.multiply.outer(z, m))
    kern = np.empty(lam.shape + (n,), dtype=complex)
    kern[..., 0] = b
    if n > 1:
        kern[..., 1:] = a[..., None] * decay[..., :-1] + b[..., None] * decay[..., 1:]
    return kern


def drive_snapshot(lam, h: float, u) -> np.ndarray:
    """Final value of d(sigma)/dt = lam*sigma + u(t) from sigma = 0.

    ``u`` has shape (..., n) (time last); returns shape u.shape[:-1] + lam.shape.
    """
    u = np.asarray(u, dtype=complex)
    kern = response_kernel(lam, h, u.shape[-1])
    return u @ kern[..., ::-1].T


# full three-level path ---------------------------------------------------

@dataclass(frozen=True)
class LambdaSystemState:
    """Optical (a-b) and Raman (a-c) coherences of velocity classes.

    ``sigma_ab`` and ``sigma_ac`` may be arrays matching ``v``; spatial phases
    exp(-i k1.r) and exp(i K.r) are factored out.
    """

    sigma_ab: np.ndarray
    sigma_ac: np.ndarray
    v: np.ndarray
    t: float

    @classmethod
    def ground(cls, v, t: float = 0.0):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        z = np.zeros(v.shape, dtype=complex)
        return cls(z, z.copy(), v, t)


def integrate_lambda_full(state: LambdaSystemState, omega1, omega2: complex,
                          delta1: float, delta2: float, gamma_ab: float,
                          gamma_ac: float, K: float, t_end: float, dt: float,
                          k1: float = 0.0) -> LambdaSystemState:
    """RK4 integration of the coupled optical/Raman coherence equations.

    ``omega1`` is a callable t -> signal Rabi frequency.  ``k1`` adds the
    one-photon Doppler shift k1*v on the optical coherence (zero for the
    projection used elsewhere).
    """
    v = np.asarray(state.v, dtype=float)
    kv = K * v
    fastest = max(abs(delta1), abs(omega2), float(np.max(np.abs(kv), initial=0.0)))
    dt_max = 0.05 / fastest
    if dt > dt_max * (1 + 1e-12):
        raise ResolutionError(
            f"time step {dt:.3g} s too coarse; need dt <= {dt_max:.3g} s")
    if t_end < state.t:
        raise ConfigurationError("t_end precedes the state time")
    n = int(math.ceil((t_end - state.t) / dt - 1e-9))
    if n == 0:
        return state
    h = (t_end - state.t) / n
    rate_ab = 1j * (delta1 + k1 * v) - gamma_ab
    rate_ac = 1j * (delta1 - delta2) - 1j * kv - gamma_ac
    o2c = np.conj(omega2)

    def rhs(t, p, q):
        drive = np.conj(omega1(t))
        return rate_ab * p + 1j * drive + 1j * o2c * q, rate_ac * q + 1j * omega2 * p

    p = np.array(state.sigma_ab, dtype=complex)
    q = np.array(state.sigma_ac, dtype=complex)
    t = state.t
    for i in range(n):
        a = rhs(t, p, q)
        b = rhs(t + h / 2, p + h / 2 * a[0], q + h / 2 * a[1])
        c = rhs(t + h / 2, p + h / 2 * b[0], q + h / 2 * b[1])
        d = rhs(t + h, p + h * c[0], q + h * c[1])
        p = p + h / 6 * (a[0] + 2 * b[0] + 2 * c[0] + d[0])
        q = q + h / 6 * (a[1] + 2 * b[1] + 2 * c[1] + d[1])
        t = state.t + (i + 1) * h
        if i % 64 == 0 and max(np.max(np.abs(p)), np.max(np.abs(q))) > LAMBDA_PERTURBATIVE_BOUND:
            raise ValidityError("coherence exceeded the perturbative bound "
                                f"{LAMBDA_PERTURBATIVE_BOUND} at t = {t:.6g} s")
    if max(np.max(np.abs(p)), np.max(np.abs(q))) > LAMBDA_PERTURBATIVE_BOUND:
        raise ValidityError("coherence exceeded the perturbative bound "
                            f"{LAMBDA_PERTURBATIVE_BOUND}")
    return LambdaSystemState(p, q, v, t_end)


# adiabatic storage ------------------------------------------------------

def integrate_storage_adiabatic(t, omega1, omega2: complex, delta1: float,
                                delta2: float | None, gamma_ac: float,
                                grid: VelocityGrid, K: float, z: float = 0.0,
                                allow_uncompensated: bool = False) -> EnsembleState:
    """Raman coherence written by a signal record at one position.

    ``t`` is a uniform time grid and ``omega1`` the signal Rabi frequency on
    it.  The optical coherence is eliminated adiabatically; the state is
    returned at ``t[-1]`` as harmonic +1 of the a-c coherence.  A residual
    two-photon detuning (light shift not cancelled by ``delta2``) is only
    accepted with ``allow_uncompensated=True``; ``delta2=None`` means
    compensated.
    """
    t = np.asarray(t, dtype=float)
    omega1 = np.asarray(omega1, dtype=complex)
    shift = abs(omega2) ** 2 / delta1
    residual = 0.0 if delta2 is None else delta1 - delta2 - shift
    if abs(residual) > 1e-9 * abs(delta1) and not allow_uncompensated:
        raise ConfigurationError(
            "delta1 - delta2 differs from the light shift |omega2|^2/delta1 by "
            f"{residual:.4g} rad/s; pass allow_uncompensated=True to accept")
    eps = omega2 / delta1
    lam = -(1j * grid.doppler(K) + gamma_ac) + 1j * residual
    h = t[1] - t[0]
    sigma = -1j * eps * drive_snapshot(lam, h, np.conj(omega1))
    st = EnsembleState.empty([z], grid, time=float(t[-1]), stage="stored")
    return st.replace(ac={1: sigma[None, :]})


# free evolution -----------------------------------------------------------

def free_evolve(state: EnsembleState, duration: float, which: str = "both",
                gamma=0.0, K: float = 0.0, advance_time: bool | None = None
                ) -> EnsembleState:
    """Doppler phase and decay over ``duration``.

    Harmonic n picks up exp(-(i n K v + gamma) T), so the harmonic-0 a-d
    coherence gains no Doppler phase.  ``gamma`` is one rate, or a pair
    (gamma_ac, gamma_ad) when ``which="both"``.  Coherence lost to decay is
    moved to the incoherent population of the same level.
    """
    if duration < 0:
        raise ConfigurationError(f"free evolution needs duration >= 0 (got {duration!r})")
    if which not in ("ac", "ad", "both"):
        raise ConfigurationError(f"which must be 'ac', 'ad' or 'both' (got {which!r})")
    if which == "both":
        g_ac, g_ad = (gamma, gamma) if np.isscalar(gamma) else gamma
    else:
        g_ac = g_ad = float(gamma)
    if advance_time is None:
        advance_time = which == "both"
    kv = state.grid.doppler(K)
    changes = {}
    for name, g, pop in (("ac", g_ac, "pop_c"), ("ad", g_ad, "pop_d")):
        if which not in (name, "both"):
            continue
        table = getattr(state, name)
        new = {}
        lost = np.zeros(state.shape)
        damp = math.exp(-g * duration)
        for n, arr in table.items():
            phase = np.exp(-1j * n * kv * duration)
            new[n] = arr * (damp * phase)[None, :]
            if g:
                lost = lost + np.abs(arr) ** 2 * (1 - damp ** 2)
        changes[name] = new
        changes[pop] = getattr(state, pop) + lost
    if advance_time:
        changes["time"] = state.time + duration
    return state.replace(**changes)


def apply_decay(state: EnsembleState, gamma_ac: float, gamma_ad: float,
                duration: float) -> EnsembleState:
    """Decay without Doppler phase, time label unchanged."""
    return free_evolve(state, duration, "both", (gamma_ac, gamma_ad), K=0.0,
                       advance_time=False)


# Raman pi pulses ------------------------------------------------------------

# area of the unit-peak Gaussian of FWHM 1 truncated at +-2 FWHM
_GAUSS_AREA = math.sqrt(math.pi / (4 * math.log(2))) * math.erf(4 * math.sqrt(math.log(2)))


@dataclass(frozen=True)
class PiPulseSpec:
    """c-d Raman pulse with equal field amplitudes on both legs.

    The two-photon Rabi frequency is 2|omega_pi(t)|**2/delta and the pulse area
    theta its time integral.  ``direction`` is the sign of k3 - k4 along K;
    ``phase`` is the pulse phase not carried by the grating.  Square pulses
    last ``tau_pi``; Gaussian pulses have a two-photon Rabi FWHM of ``tau_pi``
    and are integrated over +-2 tau_pi.
    """

    tau_pi: float
    delta: float
    omega_peak: float
    shape: str = "square"
    phase: float = 0.0
    direction: int = 1

    def __post_init__(self):
        if self.shape not in ("square", "gaussian"):
            raise ConfigurationError(f"unknown pi-pulse shape {self.shape!r}")
        if not self.tau_pi > 0:
            raise ConfigurationError("tau_pi must be > 0")
        if not self.delta > 0:
            raise ConfigurationError("pi-pulse detuning must be > 0 for a positive area")
        if self.direction not in (1, -1):
            raise ConfigurationError("pi-pulse direction must be +1 or -1")

    @classmethod
    def with_area(cls, theta: float, tau_pi: float, delta: float, shape="square",
                  phase: float = 0.0, direction: int = 1) -> "PiPulseSpec":
        if theta < 0:
            raise ConfigurationError("pulse area must be >= 0")
        norm = tau_pi if shape == "square" else tau_pi * _GAUSS_AREA
        peak = math.sqrt(theta * delta / (2 * norm))
        return cls(tau_pi, delta, peak, shape, phase, direction)

    @property
    def window(self) -> float:
        return self.tau_pi if self.shape == "square" else 4 * self.tau_pi

    def two_photon_rabi(self, s):
        """Two-photon Rabi frequency at time s from the pulse centre."""
        s = np.asarray(s, dtype=float)
        peak = 2 * self.omega_peak ** 2 / self.delta
        if self.shape == "square":
            return np.where(np.abs(s) <= self.tau_pi / 2 * (1 + 1e-9), peak, 0.0)
        return peak * np.exp(-4 * math.log(2) * (s / self.tau_pi) ** 2)

    @property
    def area(self) -> float:
        peak = 2 * self.omega_peak ** 2 / self.delta
        if self.shape == "square":
            return peak * self.tau_pi
        return peak * self.tau_pi * _GAUSS_AREA

    def two_level_valid(self, delta_s: float, limit: float = 0.01) -> bool:
        """Off-resonant excitation of level b stays negligible."""
        return (self.omega_peak / (self.delta - abs(delta_s))) ** 2 <= limit


def _pairs(state: EnsembleState, sign: int):
    keys = set(state.ac) | {m + sign for m in state.ad}
    return sorted(keys)


def pi_pulse_rotate(state: EnsembleState, theta: float, phi: float = 0.0,
                    direction: int = 1, gamma_ac: float = 0.0,
                    gamma_ad: float = 0.0, elapsed: float = 0.0) -> EnsembleState:
    """Impulsive c-d rotation of area ``theta``.

    Harmonic n of a-c couples to harmonic n - direction of a-d.  Incoherent
    populations are exchanged with weights cos^2 and sin^2 of theta/2.
    ``elapsed`` applies Doppler-free decay afterwards.
    """
    if direction not in (1, -1):
        raise ConfigurationError("direction must be +1 or -1")
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    up = 1j * np.exp(1j * phi) * s
    down = 1j * np.exp(-1j * phi) * s
    zero = np.zeros(state.shape, dtype=complex)
    ac, ad = {}, {}
    for n in _pairs(state, direction):
        m = n - direction
        cn = state.ac.get(n, zero)
        dm = state.ad.get(m, zero)
        ac[n] = c * cn + up * dm
        ad[m] = down * cn + c * dm
    ac = {n: a for n, a in ac.items() if np.any(a)}
    ad = {m: a for m, a in ad.items() if np.any(a)}
    pop_c = c * c * state.pop_c + s * s * state.pop_d
    pop_d = s * s * state.pop_c + c * c * state.pop_d
    out = state.replace(ac=ac, ad=ad, pop_c=pop_c, pop_d=pop_d)
    if elapsed:
        out = apply_decay(out, gamma_ac, gamma_ad, elapsed)
    return out


def pi_pulse_integrate(state: EnsembleState, spec: PiPulseSpec, K: float,
                       dt: float, gamma_ac: float = 0.0, gamma_ad: float = 0.0
                       ) -> EnsembleState:
    """Finite-duration c-d pulse, integrated with RK4 over ``spec.window``.

    The state time is taken as the start of the pulse window.  Harmonic n of
    a-c keeps its Doppler shift n K v during the pulse.  Incoherent population
    is moved with the transfer probability of an atom starting in c.
    """
    if dt > 0.02 * spec.tau_pi * (1 + 1e-12):
        raise ResolutionError(
            f"pi-pulse step {dt:.3g} s too coarse; need dt <= {0.02 * spec.tau_pi:.3g} s")
    sign = spec.direction
    if spec.tau_pi * max(gamma_ac, gamma_ad) <= PI_DECAY_NEGLIGIBLE:
        gamma_ac = gamma_ad = 0.0
    n_steps = int(math.ceil(spec.window / dt - 1e-9))
    h = spec.window / n_steps
    kv = state.grid.doppler(K)
    e_up = 1j * np.exp(1j * spec.phase) / 2
    e_down = 1j * np.exp(-1j * spec.phase) / 2
    keys = _pairs(state, sign)
    zero = np.zeros(state.shape, dtype=complex)
    # stack pairs plus one unit-amplitude pair (per class) for populations
    cs = [np.array(state.ac.get(n, zero)) for n in keys] + [np.ones((1, len(kv)), complex)]
    ds = [np.array(state.ad.get(n - sign, zero)) for n in keys] + [np.zeros((1, len(kv)), complex)]
    rate_c = [-(1j * n * kv + gamma_ac) for n in keys] + [-(1j * sign * kv)]
    rate_d = [-(1j * (n - sign) * kv + gamma_ad) for n in keys] + [np.zeros_like(kv)]

    def rhs(s, cc, dd):
        r = float(spec.two_photon_rabi(s))
        return ([rc * c + r * e_up * d for rc, c, d in zip(rate_c, cc, dd)],
                [rd * d + r * e_down * c for rd, c, d in zip(rate_d, cc, dd)])

    def axpy(xs, ks, f):
        return [x + f * k for x, k in zip(xs, ks)]

    s0 = -spec.window / 2
    for i in range(n_steps):
        s = s0 + i * h
        k1 = rhs(s, cs, ds)
        k2 = rhs(s + h / 2, axpy(cs, k1[0], h / 2), axpy(ds, k1[1], h / 2))
        k3 = rhs(s + h / 2, axpy(cs, k2[0], h / 2), axpy(ds, k2[1], h / 2))
        k4 = rhs(s + h, axpy(cs, k3[0], h), axpy(ds, k3[1], h))
        cs = [c + h / 6 * (a + 2 * b + 2 * cc + d)
              for c, a, b, cc, d in zip(cs, k1[0], k2[0], k3[0], k4[0])]
        ds = [x + h / 6 * (a + 2 * b + 2 * cc + d)
              for x, a, b, cc, d in zip(ds, k1[1], k2[1], k3[1], k4[1])]
    transfer = np.abs(ds[-1][0]) ** 2
    ac = {n: c for n, c in zip(keys, cs[:-1]) if np.any(c)}
    ad = {n - sign: d for n, d in zip(keys, ds[:-1]) if np.any(d)}
    stay = 1 - transfer
    pop_c = stay * state.pop_c + transfer * state.pop_d
    pop_d = transfer * state.pop_c + stay * state.pop_d
    return state.replace(ac=ac, ad=ad, pop_c=pop_c, pop_d=pop_d,
                         time=state.time + spec.window)


def impulsive_equivalent(state: EnsembleState, spec: PiPulseSpec, K: float,
                         gamma_ac: float = 0.0, gamma_ad: float = 0.0) -> EnsembleState:
    """Free evolution to the pulse centre, rotation, free evolution to the end."""
    half = spec.window / 2
    g = (gamma_ac, gamma_ad)
    out = free_evolve(state, half, "both", g, K)
    out = pi_pulse_rotate(out, spec.area, spec.phase, spec.direction)
    return free_evolve(out, half, "both", g, K)


def pi_transfer_error(state: EnsembleState, spec: PiPulseSpec, K: float,
                      dt: float) -> float:
    """Largest per-class amplitude difference between finite and impulsive pulses.

    Normalised by the largest stored amplitude, so it is the worst error of
    any velocity class in units of the peak coherence.
    """
    ref = impulsive_equivalent(state, spec, K)
    fin = pi_pulse_integrate(state, spec, K, dt)
    scale = state.max_coherence()
    if scale == 0:
        return 0.0
    err = 0.0
    for table_r, table_f in ((ref.ac, fin.ac), (ref.ad, fin.ad)):
        for n in set(table_r) | set(table_f):
            a = table_r.get(n, 0.0)
            b = table_f.get(n, 0.0)
            err = max(err, float(np.max(np.abs(np.asarray(a) - np.asarray(b)))))
    return err / scale
