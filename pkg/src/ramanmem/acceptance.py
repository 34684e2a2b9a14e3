"""Acceptance suite A1-A11 at pinned configurations.

Each check returns a :class:`CriterionResult`; :func:`run_suite` runs a
selection and shares protocol runs between criteria that reuse them.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .config import build_scenario, load_raw, set_param
from .core import EnsembleState, VelocityGrid, velocity_grid_for
from .dynamics import (LambdaSystemState, PiPulseSpec, impulsive_equivalent,
                       integrate_lambda_full, integrate_storage_adiabatic,
                       pi_pulse_integrate, pi_transfer_error)
from .geometry import optimize_angle, raman_absorption, relative_wavevector
from .oracle import mirror_overlap, predict, retrieved_fraction
from .protocol import TimingWarning, relative_difference, run_protocol


@dataclass
class CriterionResult:
    id: str
    description: str
    value: float
    threshold: float
    passed: bool
    runtime: float = 0.0
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{self.id} {status}  {self.description}: value={self.value:.6g} "
                f"threshold={self.threshold:.6g} ({self.runtime:.1f} s)")


def default_config_dir() -> Path:
    return Path(str(resources.files("ramanmem") / "configs"))


class Suite:
    """Runs criteria against the pinned configs in ``config_dir``."""

    def __init__(self, config_dir=None):
        self.config_dir = Path(config_dir) if config_dir else default_config_dir()
        self._raw = {}
        self._runs = {}

    def raw(self, name):
        if name not in self._raw:
            self._raw[name] = load_raw(self.config_dir / f"{name}.ini")
        return self._raw[name]

    def scenario(self, name, **params):
        raw = self.raw(name)
        for path, value in params.items():
            raw = set_param(raw, path.replace("__", "."), value)
        return build_scenario(raw)

    def run(self, name, options=None, **params):
        key = (name, tuple(sorted(params.items())), options)
        if key not in self._runs:
            sc = self.scenario(name, **params)
            opts = sc.options if options is None else options(sc.options)
            t0 = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TimingWarning)
                res = run_protocol(sc.physical, sc.geometry, sc.timeline, sc.signal, opts, sc.c)
            self._runs[key] = (sc, res, time.perf_counter() - t0)
        return self._runs[key]

    # criteria -----------------------------------------------------------------

    def a1(self):
        sc, res, dt = self.run("broadband", physical__optical_depth=3.0)
        ref = math.exp(-3.0)
        err = abs(res.transmitted_fraction - ref) / ref
        ok = err <= 0.02 and dt <= 10
        return CriterionResult("A1", "storage transmission vs exp(-3), relative error",
                               err, 0.02, ok, dt,
                               {"transmitted": res.transmitted_fraction, "expected": ref,
                                "runtime_limit_s": 10})

    def a2(self):
        rows, worst, slowest, ok = [], 0.0, 0.0, True
        for d in (0.5, 1.0, 2.0, 4.0):
            sc, res, dt = self.run("broadband", physical__optical_depth=d)
            ref = retrieved_fraction(d)
            err = abs(res.retrieved_energy_fraction - ref) / ref
            rows.append({"optical_depth": d, "retrieved": res.retrieved_energy_fraction,
                         "expected": ref, "relative_error": err, "runtime_s": dt})
            worst, slowest = max(worst, err), max(slowest, dt)
            ok = ok and err <= 0.03 and dt <= 60
        return CriterionResult("A2", "retrieval efficiency vs (1-exp(-d))^2, worst relative error",
                               worst, 0.03, ok, slowest, {"points": rows})

    def a3(self):
        sc, res, dt = self.run("two_hump", physical__optical_depth=4.0)
        p = predict(sc.physical, sc.geometry, sc.timeline, sc.signal)
        ref = p.restored_envelope(0.0, res.output.t)
        ov = mirror_overlap(ref, res.output.amplitude[0])
        return CriterionResult("A3", "two-hump read-out overlap with mirrored input",
                               ov, 0.999, ov >= 0.999, dt,
                               {"overlap_with_plain_mirror": res.mirror_overlap})

    def a4(self):
        sc, res, dt = self.run("broadband", physical__optical_depth=math.log(2))
        err = abs(res.residual_eta - 0.5) / 0.5
        return CriterionResult("A4", "residual excitation at d = ln 2 vs 0.5, relative error",
                               err, 0.02, err <= 0.02, dt, {"eta": res.residual_eta})

    def a5(self):
        sc0, r0, t0 = self.run("broadband", physical__optical_depth=2.0)
        g_ac = 0.05 / sc0.timeline.t12
        g_ad = 0.1 / sc0.timeline.t23
        sc1, r1, t1 = self.run("broadband", physical__optical_depth=2.0,
                               physical__gamma_ac=g_ac, physical__gamma_ad=g_ad)
        expect = r0.retrieved_energy_fraction * math.exp(-0.4)
        err = abs(r1.retrieved_energy_fraction - expect) / expect
        return CriterionResult("A5", "decay factorisation exp(-0.4), relative error",
                               err, 1e-9, err <= 1e-9, t0 + t1,
                               {"with_decay": r1.retrieved_energy_fraction,
                                "without_decay": r0.retrieved_energy_fraction})

    def a6(self):
        sc0, r0, t0 = self.run("broadband", physical__optical_depth=2.0)
        t23 = sc0.timeline.t23
        sc1, r1, t1 = self.run("broadband", physical__optical_depth=2.0,
                               timeline__t23=10 * t23)
        diff = relative_difference(r1.output, r0.output)
        return CriterionResult("A6", "read-out change for t23 x 10 (relative norm)",
                               diff, 1e-9, diff <= 1e-9, t0 + t1,
                               {"t23": t23, "t23_long": 10 * t23})

    def a7(self):
        sc, ref, dt = self.run("phase_matching")
        e_ref = ref.exit_energy()
        trials = {
            "forward signal, forward control": lambda o: replace(o, signal_direction=1,
                                                                 control_direction=1),
            "no reversal pulse": lambda o: replace(o, theta3=0.0),
            "forward signal, backward control": lambda o: replace(o, signal_direction=1),
            "stage-3 pulse along +K, forward read-out": lambda o: replace(
                o, stage3_direction=1, signal_direction=1, control_direction=1),
        }
        ratios, total = {}, dt
        for name, fn in trials.items():
            _, res, t = self.run("phase_matching", options=fn)
            ratios[name] = res.exit_energy() / e_ref
            total += t
        worst = max(ratios["forward signal, forward control"], ratios["no reversal pulse"])
        ku_t12 = sc.geometry.K * sc.physical.u * sc.timeline.t12
        return CriterionResult("A7", "wrong-direction / no-reversal energy ratio (worst)",
                               worst, 1e-3, worst <= 1e-3, total,
                               {"ratios": ratios, "ku_t12": ku_t12,
                                "reference_retrieved": ref.retrieved_energy_fraction})

    def a8(self):
        sc = self.scenario("broadband")
        t0 = time.perf_counter()
        ds = sc.signal.bandwidth
        K = sc.geometry.K
        tau_pi = 0.01 / ds
        ku = K * sc.physical.u
        window = float(sc.signal.t[-1] - sc.signal.t[0])
        grid = velocity_grid_for(sc.physical.u, ku * window)
        stored = integrate_storage_adiabatic(sc.signal.t, sc.signal.amplitude[0],
                                             sc.physical.omega2, sc.physical.delta1, None,
                                             0.0, grid, K)
        spec = PiPulseSpec.with_area(math.pi, tau_pi, sc.physical.pi_detuning)
        err = pi_transfer_error(stored, spec, K, tau_pi / 50)
        # per-class error of a unit amplitude at the band edge and at K v tau_pi = 1e-3
        probe = self._unit_class_errors(spec, [ds / K, 1e-3 / (tau_pi * K)], K, sc.physical.u)
        return CriterionResult("A8", "finite vs impulsive pi pulse, max class error / peak",
                               err, 1e-3, err <= 1e-3, time.perf_counter() - t0,
                               {"delta_s_tau_pi": ds * tau_pi,
                                "unit_error_at_band_edge": probe[0],
                                "unit_error_at_kv_tau_1e-3": probe[1]})

    @staticmethod
    def _unit_class_errors(spec, velocities, K, u):
        v = np.asarray(velocities, float)
        grid = VelocityGrid(nodes=v, weights=np.full(len(v), 1 / len(v)), u=u, rule="probe")
        st = EnsembleState.empty([0.0], grid).replace(ac={1: np.ones((1, len(v)), complex)})
        a = impulsive_equivalent(st, spec, K)
        b = pi_pulse_integrate(st, spec, K, spec.tau_pi / 50)
        err = np.zeros(len(v))
        for key in set(a.ac) | set(b.ac):
            err = np.maximum(err, np.abs(a.ac.get(key, 0) - b.ac.get(key, 0))[0])
        for key in set(a.ad) | set(b.ad):
            err = np.maximum(err, np.abs(a.ad.get(key, 0) - b.ad.get(key, 0))[0])
        return [float(e) for e in err]

    def a9(self):
        t0 = time.perf_counter()
        devs = [adiabatic_deviation(r) for r in ADIABATIC_RATIOS]
        halving = [devs[i] / devs[i + 1] for i in range(len(devs) - 1)]
        ok = devs[0] <= 2e-2 and all(1 / 1.5 * 2 <= h <= 1.5 * 2 for h in halving)
        return CriterionResult("A9", "full vs adiabatic storage at delta1 = 100 max rate",
                               devs[0], 2e-2, ok, time.perf_counter() - t0,
                               {"ratios": list(ADIABATIC_RATIOS), "deviations": devs,
                                "halving_factors": halving})

    def a10(self):
        rows, worst, total = [], 0.0, 0.0
        for d in (0.5, 1.0, 2.0, 3.0, 4.0):
            sc, res, dt = self.run("broadband", physical__optical_depth=d)
            stored = res.stored_fraction
            residual = res.residual_eta * stored
            err = abs(stored - (res.retrieved_energy_fraction + residual)) / stored
            rows.append({"optical_depth": d, "stored": stored,
                         "retrieved": res.retrieved_energy_fraction,
                         "residual": residual, "relative_error": err})
            worst = max(worst, err)
            total += dt
        return CriterionResult("A10", "stored = retrieved + residual, worst relative error",
                               worst, 0.03, worst <= 0.03, total, {"points": rows})

    def a11(self):
        t0 = time.perf_counter()
        sc = self.scenario("broadband")
        ph = sc.physical
        Ks = np.linspace(0.01, 2.0, 41) * ph.k
        prods = np.array([raman_absorption(ph.k, K, ph.omega2, ph.delta1, ph.alpha0) * K
                          for K in Ks])
        spread = float(np.max(np.abs(prods / prods[0] - 1)))
        ds, margin = sc.signal.bandwidth, 3.0
        dp = optimize_angle(ds, margin, ph)
        thetas = np.linspace(dp.theta * 0.2, min(math.pi, dp.theta * 5), 401)
        below_ok = all(relative_wavevector(t, ph.k) * ph.u < margin * ds
                       for t in thetas if t < dp.theta * (1 - 1e-12))
        above_ok = all(raman_absorption(ph.k, relative_wavevector(t, ph.k), ph.omega2,
                                        ph.delta1, ph.alpha0) < dp.alpha_r
                       for t in thetas if t > dp.theta * (1 + 1e-12))
        ok = spread <= 1e-12 and below_ok and above_ok
        return CriterionResult("A11", "alpha_R K spread over a K sweep; angle optimality",
                               spread, 1e-12, ok, time.perf_counter() - t0,
                               {"theta_star": dp.theta, "smaller_angles_violate_margin": below_ok,
                                "larger_angles_absorb_less": above_ok})


ADIABATIC_RATIOS = (100.0, 200.0, 400.0)


def adiabatic_deviation(ratio: float, ku: float = 1e9) -> float:
    """Weighted relative deviation of full vs adiabatic stored coherence.

    Gaussian signal of amplitude width 2/(K u), omega2 = gamma_ab = K u,
    omega1 = 0.05 K u, delta1 = ratio * K u, classes K v in [-2, 2] K u.
    """
    K, u = 1.0, ku
    delta1 = ratio * ku
    omega2, omega1 = ku, 0.05 * ku
    sig = 2.0 / ku
    delta2 = delta1 - omega2 ** 2 / delta1
    v = np.linspace(-2, 2, 9) * u
    f = lambda t: omega1 * np.exp(-t ** 2 / (2 * sig ** 2))  # noqa: E731
    t_start, t_end = -6 * sig, 6 * sig
    full = integrate_lambda_full(LambdaSystemState.ground(v, t_start), f, omega2, delta1,
                                 delta2, ku, 0.0, K, t_end, 0.05 / delta1)
    grid = VelocityGrid(nodes=v, weights=np.exp(-(v / u) ** 2) / np.sum(np.exp(-(v / u) ** 2)),
                        u=u, rule="probe")
    tt = np.linspace(t_start, t_end, 4001)
    adi = integrate_storage_adiabatic(tt, f(tt), omega2, delta1, delta2, 0.0, grid, K)
    q = adi.ac[1][0]
    w = grid.weights
    return float(np.sqrt(np.sum(w * np.abs(full.sigma_ac - q) ** 2) / np.sum(w * np.abs(q) ** 2)))


CRITERIA = ("A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11")


def run_suite(config_dir=None, only=None) -> list[CriterionResult]:
    suite = Suite(config_dir)
    out = []
    for cid in CRITERIA:
        if only and cid not in only:
            continue
        out.append(getattr(suite, cid.lower())())
    return out


def summary(results) -> dict:
    """Deterministic machine-readable summary (no timings)."""
    def clean(r):
        d = asdict(r)
        d.pop("runtime")
        d["detail"] = _strip_runtime(d["detail"])
        return d
    return {"passed": all(r.passed for r in results), "criteria": [clean(r) for r in results]}


def _strip_runtime(obj):
    if isinstance(obj, dict):
        return {k: _strip_runtime(v) for k, v in obj.items() if not k.startswith("runtime")}
    if isinstance(obj, list):
        return [_strip_runtime(v) for v in obj]
    return obj

