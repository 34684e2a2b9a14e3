"""Domain types, unit conventions and discretization grids.

All public types take SI inputs (seconds, metres, rad/s).  The solvers work
internally in reduced units: time in 1/(K u), length in 1/alpha_R and Rabi
frequencies in units of K u.  :class:`ReducedUnits` holds the conversion.

Coherences are stored with their spatial grating factor exp(i n K.r) removed;
``n`` is the grating harmonic.  The signal stage writes harmonic +1 of the a-c
coherence, a stage-2 pulse moves it to harmonic 0 of a-d, and the reversed
stage-3 pulse brings it back to harmonic -1 of a-c.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import roots_hermite

from .errors import ConfigurationError, ResolutionError, UndefinedQuantityError

SQRT_PI = math.sqrt(math.pi)

# adiabatic elimination needs delta1 to dominate every other rate by this factor
ADIABATIC_RATIO = 10.0
# pi pulses must be short compared to the inverse signal bandwidth
PI_PULSE_BANDWIDTH_LIMIT = 0.1


@dataclass(frozen=True)
class PhysicalConfig:
    """Medium and field constants, SI units.

    The atom density and dipole moments only enter through ``alpha0`` (linear
    absorption on a-b) and the Rabi frequencies.  ``delta2=None`` selects the
    light-shift compensated value ``delta1 - |omega2|**2 / delta1``.
    """

    delta1: float
    omega2: complex
    alpha0: float
    u: float
    length: float
    k: float
    omega1_peak: float = 0.0
    delta2: float | None = None
    gamma_ab: float = 0.0
    gamma_ac: float = 0.0
    gamma_ad: float = 0.0
    omega_pi_peak: float | None = None
    delta_pi: float | None = None

    @property
    def light_shift(self) -> float:
        return abs(self.omega2) ** 2 / self.delta1

    @property
    def effective_delta2(self) -> float:
        return self.delta1 - self.light_shift if self.delta2 is None else self.delta2

    @property
    def raman_detuning(self) -> float:
        """Residual two-photon detuning after the light shift, rad/s."""
        return self.delta1 - self.effective_delta2 - self.light_shift

    @property
    def epsilon(self) -> complex:
        """Control-field Raman coupling ratio omega2 / delta1."""
        return complex(self.omega2) / self.delta1

    @property
    def pi_detuning(self) -> float:
        return self.delta1 if self.delta_pi is None else self.delta_pi

    def issues(self) -> list[str]:
        out = []
        for name in ("alpha0", "u", "length", "k"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be > 0 (got {getattr(self, name)!r})")
        for name in ("gamma_ab", "gamma_ac", "gamma_ad"):
            if getattr(self, name) < 0:
                out.append(f"{name} must be >= 0 (got {getattr(self, name)!r})")
        if self.delta1 == 0:
            out.append("delta1 must be non-zero")
        else:
            fastest = max(abs(self.omega1_peak), abs(self.omega2), self.gamma_ab,
                          self.k * self.u)
            if abs(self.delta1) < ADIABATIC_RATIO * fastest:
                out.append(
                    "adiabaticity: |delta1| must be >= %g x max(|omega1|, |omega2|, "
                    "gamma_ab, k u) = %.6g rad/s (got %.6g)"
                    % (ADIABATIC_RATIO, ADIABATIC_RATIO * fastest, abs(self.delta1)))
        return out

    def check(self) -> "PhysicalConfig":
        issues = self.issues()
        if issues:
            raise ConfigurationError(issues)
        return self


@dataclass(frozen=True)
class BeamGeometry:
    """Signal/control beam angle and the derived two-photon wave vector.

    Propagation is solved along z parallel to k1; the angle only sets
    K = |k2 - k1| = 2 k sin(theta/2).  ``stage2_sign`` and ``stage3_sign`` give
    k3 - k4 and k3' - k4' in units of K.
    """

    theta: float
    k: float
    stage2_sign: int = 1
    stage3_sign: int = -1

    def __post_init__(self):
        if not (0.0 < self.theta <= math.pi):
            raise ConfigurationError(f"theta must lie in (0, pi] (got {self.theta!r})")
        if not self.k > 0:
            raise ConfigurationError(f"k must be > 0 (got {self.k!r})")
        if self.stage2_sign not in (1, -1) or self.stage3_sign not in (1, -1):
            raise ConfigurationError("stage pulse directions must be +1 or -1")

    @property
    def K(self) -> float:
        return 2.0 * self.k * math.sin(self.theta / 2.0)

    def bandwidth(self, u: float) -> float:
        """Raman Doppler width K u in rad/s."""
        return self.K * u


@dataclass(frozen=True)
class ProtocolTimeline:
    """Centres of the three pulse pairs and the pulse durations, seconds.

    ``control_lead`` is how long before the echo time t3 + t12 the read-out
    control is switched on; ``None`` means 5 signal durations.
    """

    t1: float
    t2: float
    t3: float
    tau_p: float
    tau_pi: float
    control_lead: float | None = None

    @property
    def t12(self) -> float:
        return self.t2 - self.t1

    @property
    def t23(self) -> float:
        return self.t3 - self.t2

    @property
    def echo_time(self) -> float:
        return self.t3 + self.t12

    @property
    def lead(self) -> float:
        return 5.0 * self.tau_p if self.control_lead is None else self.control_lead

    @property
    def retrieval_start(self) -> float:
        return self.echo_time - self.lead

    def issues(self, delta_s: float | None = None) -> list[str]:
        out = []
        if not (self.t1 < self.t2 < self.t3):
            out.append("timeline: need t1 < t2 < t3 (got %r, %r, %r)"
                       % (self.t1, self.t2, self.t3))
        if not self.tau_p > 0:
            out.append(f"tau_p must be > 0 (got {self.tau_p!r})")
        if not self.tau_pi > 0:
            out.append(f"tau_pi must be > 0 (got {self.tau_pi!r})")
        if self.tau_p > 0 and self.t12 <= self.tau_p:
            out.append("timeline: t12 = %.6g s must exceed the signal duration %.6g s"
                       % (self.t12, self.tau_p))
        if self.lead <= 0:
            out.append(f"control_lead must be > 0 (got {self.lead!r})")
        elif self.lead >= self.t12 - 0.5 * self.tau_pi:
            out.append("timeline: read-out control would switch on before the stage-3 "
                       "pulse ends (control_lead %.6g s >= t12 - tau_pi/2)" % self.lead)
        if delta_s is not None and self.tau_pi > 0:
            if delta_s * self.tau_pi > PI_PULSE_BANDWIDTH_LIMIT:
                out.append(
                    "pi-pulse bandwidth condition: delta_s * tau_pi = %.4g exceeds %g; "
                    "the pi pulse cannot address every stored velocity class"
                    % (delta_s * self.tau_pi, PI_PULSE_BANDWIDTH_LIMIT))
        return out

    def check(self, delta_s: float | None = None) -> "ProtocolTimeline":
        issues = self.issues(delta_s)
        if issues:
            raise ConfigurationError(issues)
        return self


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    """Quadrature for the velocity projection along K.

    ``nodes`` are velocities in m/s, ``weights`` sum to one and represent
    W(v) = exp(-v**2/u**2) / (u sqrt(pi)).
    """

    nodes: np.ndarray
    weights: np.ndarray
    u: float
    rule: str

    def __len__(self):
        return len(self.nodes)

    def doppler(self, K: float) -> np.ndarray:
        """Two-photon Doppler shifts K v_j, rad/s."""
        return K * self.nodes

    def characteristic(self, K: float, tau) -> np.ndarray:
        """Quadrature estimate of the velocity average of exp(i K v tau)."""
        tau = np.asarray(tau, dtype=float)
        return np.exp(1j * np.multiply.outer(tau, K * self.nodes)) @ self.weights

    def characteristic_residual(self, max_ku_tau: float) -> float:
        """Worst error of the characteristic function for |K u tau| <= max_ku_tau."""
        s = np.linspace(0.0, max_ku_tau, int(max_ku_tau / 0.02) + 2)
        x = self.nodes / self.u
        err = 0.0
        for chunk in np.array_split(s, max(1, len(s) // 2000)):
            approx = np.exp(1j * np.multiply.outer(chunk, x)) @ self.weights
            err = max(err, float(np.max(np.abs(approx - np.exp(-chunk ** 2 / 4)))))
        return err


def _hermite_grid(u: float, n: int) -> VelocityGrid:
    x, w = roots_hermite(n)
    w = w / w.sum()
    return VelocityGrid(nodes=u * x, weights=w, u=u, rule="hermite")


def _uniform_grid(u: float, n: int, half_width: float = 6.0) -> VelocityGrid:
    if n % 2 == 0:
        n += 1
    x = np.linspace(-half_width, half_width, n)
    w = np.exp(-x ** 2)
    w = w / w.sum()
    return VelocityGrid(nodes=u * x, weights=w, u=u, rule="uniform")


def build_velocity_grid(u: float, n: int = 64, rule: str = "hermite",
                        max_ku_tau: float = 6.0, tol: float = 1e-6) -> VelocityGrid:
    """Velocity quadrature checked against the Gaussian characteristic function.

    Raises ResolutionError when ``n`` nodes cannot reproduce
    exp(-(K u tau)**2 / 4) to ``tol`` over |K u tau| <= max_ku_tau.
    """
    if not u > 0:
        raise ConfigurationError(f"u must be > 0 (got {u!r})")
    if n < 8:
        raise ConfigurationError(f"velocity grid needs at least 8 nodes (got {n})")
    if rule == "hermite":
        grid = _hermite_grid(u, n)
    elif rule == "uniform":
        grid = _uniform_grid(u, n)
    else:
        raise ConfigurationError(f"unknown velocity rule {rule!r}")
    residual = grid.characteristic_residual(max_ku_tau)
    if residual > tol:
        raise ResolutionError(
            "%s velocity grid with %d nodes reaches residual %.3g > %.1g in the "
            "characteristic function up to |K u tau| = %g"
            % (rule, len(grid), residual, tol, max_ku_tau))
    return grid


def velocity_grid_for(u: float, max_ku_tau: float, tol: float = 1e-6,
                      rule: str = "uniform") -> VelocityGrid:
    """Smallest grid of the given rule that is accurate up to ``max_ku_tau``.

    The uniform rule aliases at |K u tau| = 2 pi / spacing, so the spacing is
    chosen to keep the first alias 12 Doppler times past the window.
    """
    max_ku_tau = max(float(max_ku_tau), 6.0)
    if rule == "uniform":
        spacing = 2 * math.pi / (max_ku_tau + 12.0)
        n = 2 * int(math.ceil(6.0 / spacing)) + 1
        return build_velocity_grid(u, n, "uniform", max_ku_tau, tol)
    n = 64
    while True:
        try:
            return build_velocity_grid(u, n, rule, max_ku_tau, tol)
        except ResolutionError:
            if n > 4096:
                raise
            n *= 2


def spectral_fwhm(t, amplitude, pad: int = 16) -> float:
    """FWHM of |FT(amplitude)|**2 in rad/s (angular frequency)."""
    a = np.asarray(amplitude, dtype=complex)
    t = np.asarray(t, dtype=float)
    if a.ndim != 1 or len(a) != len(t) or len(a) < 2:
        raise ConfigurationError("need matching 1D time and amplitude arrays")
    if not np.any(a):
        raise UndefinedQuantityError("bandwidth of an all-zero envelope is undefined")
    dt = t[1] - t[0]
    nfft = 1 << int(math.ceil(math.log2(max(pad * len(a), 4096))))
    spec = np.fft.fftshift(np.abs(np.fft.fft(a, nfft)) ** 2)
    omega = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(nfft, dt))
    i0 = int(np.argmax(spec))
    half = 0.5 * spec[i0]

    def crossing(step):
        j = i0
        while 0 <= j + step < nfft:
            if spec[j + step] < half:
                x0, x1 = omega[j], omega[j + step]
                y0, y1 = spec[j], spec[j + step]
                return x0 + (half - y0) * (x1 - x0) / (y1 - y0)
            j += step
        raise ResolutionError("spectrum does not fall to half maximum inside the "
                              "Nyquist band; reduce the time step")

    return float(crossing(1) - crossing(-1))


@dataclass(frozen=True, eq=False)
class FieldEnvelope:
    """Slowly varying field envelope on a (z, t) grid.

    ``amplitude`` has shape (len(z), len(t)) and holds the Rabi frequency
    (rad/s) of the signal mode.  ``t`` is the co-moving time: t - z/c for
    ``direction=+1`` and t + z/c for ``direction=-1``.
    """

    t: np.ndarray
    amplitude: np.ndarray
    z: np.ndarray = field(default_factory=lambda: np.zeros(1))
    direction: int = 1
    carrier: str = "signal"
    bandwidth: float = field(init=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        a = np.atleast_2d(np.asarray(self.amplitude, dtype=complex))
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if a.shape != (len(z), len(t)):
            raise ConfigurationError(
                f"amplitude shape {a.shape} does not match (len(z), len(t)) = "
                f"{(len(z), len(t))}")
        if len(t) > 2 and not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9, atol=0):
            raise ConfigurationError("time grid must be uniform")
        if self.direction not in (1, -1):
            raise ConfigurationError("direction must be +1 or -1")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "amplitude", a)
        object.__setattr__(self, "z", z)
        bw = spectral_fwhm(t, a[0]) if np.any(a[0]) and len(t) > 1 else math.nan
        object.__setattr__(self, "bandwidth", bw)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0]) if len(self.z) > 1 else math.nan

    def energy(self, iz: int = 0) -> float:
        """Time-integrated |amplitude|**2 at the iz-th z node."""
        return float(np.sum(np.abs(self.amplitude[iz]) ** 2) * self.dt)

    def lab_time(self, iz: int = 0, c: float = math.inf) -> np.ndarray:
        """Laboratory time of the samples at node iz for light speed c."""
        return self.t + self.direction * self.z[iz] / c


def signal_bandwidth(env: FieldEnvelope, iz: int = 0) -> float:
    """Spectral FWHM (rad/s) of the envelope at the iz-th z node."""
    return spectral_fwhm(env.t, env.amplitude[iz])


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """Velocity-resolved Raman coherences on a z grid.

    ``ac`` and ``ad`` map a grating harmonic n to an array of shape
    (len(z), len(grid)).  ``pop_c``/``pop_d`` hold population that is no longer
    phase coherent with level a (lost through coherence decay); the total
    excited population of a cell is that plus the sum of |coherence|**2.
    """

    z: np.ndarray
    grid: VelocityGrid
    ac: Mapping[int, np.ndarray]
    ad: Mapping[int, np.ndarray]
    pop_c: np.ndarray
    pop_d: np.ndarray
    time: float
    stage: str = "initial"

    @classmethod
    def empty(cls, z, grid: VelocityGrid, time: float = 0.0, stage: str = "initial"):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        zeros = np.zeros((len(z), len(grid)))
        return cls(z=z, grid=grid, ac={}, ad={}, pop_c=zeros, pop_d=zeros.copy(),
                   time=time, stage=stage)

    @property
    def shape(self):
        return (len(self.z), len(self.grid))

    def replace(self, **changes) -> "EnsembleState":
        return dataclasses.replace(self, **changes)

    def coherence(self, which: str, harmonic: int) -> np.ndarray:
        table = self.ac if which == "ac" else self.ad
        return table.get(harmonic, np.zeros(self.shape, dtype=complex))

    def coherent_population(self, which: str | None = None) -> np.ndarray:
        out = np.zeros(self.shape)
        tables = {"ac": [self.ac], "ad": [self.ad], None: [self.ac, self.ad]}[which]
        for table in tables:
            for arr in table.values():
                out = out + np.abs(arr) ** 2
        return out

    def population(self) -> np.ndarray:
        """Total population outside level a, per (z, velocity) cell."""
        return self.coherent_population() + self.pop_c + self.pop_d

    def integrated(self, cell_values: np.ndarray) -> float:
        """Velocity average and z integral of a per-cell quantity."""
        per_z = np.asarray(cell_values) @ self.grid.weights
        if len(self.z) == 1:
            return float(per_z[0])
        return float(np.trapezoid(per_z, self.z))

    def max_coherence(self) -> float:
        vals = [np.max(np.abs(a)) for a in (*self.ac.values(), *self.ad.values())]
        return float(max(vals, default=0.0))

    def check_perturbative(self, limit: float = 0.1) -> None:
        from .errors import ValidityError
        m = self.max_coherence()
        if m > limit:
            raise ValidityError(
                f"coherence amplitude {m:.3g} exceeds the weak-signal bound {limit}; "
                "the ground-state depletion is no longer negligible")


@dataclass(frozen=True)
class ReducedUnits:
    """Conversion to solver units: time x K u, length x alpha_R, Rabi / K u."""

    ku: float
    alpha_r: float
    u: float

    def time(self, t):
        return np.asarray(t) * self.ku

    def length(self, z):
        return np.asarray(z) * self.alpha_r

    def rabi(self, omega):
        return np.asarray(omega) / self.ku

    def velocity(self, v):
        return np.asarray(v) / self.u
