"""INI scenario files: schema, exhaustive validation and hashing."""

from __future__ import annotations

import configparser
import copy
import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import BeamGeometry, FieldEnvelope, PhysicalConfig, ProtocolTimeline
from .errors import ConfigurationError, InfeasibleGeometryError
from .geometry import DEFAULT_MARGIN, optimal_theta, raman_absorption
from .protocol import SolverOptions, make_signal, signal_from_samples

OUTPUT_ENV = "RAMANMEM_OUTPUT_DIR"
TRANSPORT_LIMIT = 0.1
PERTURBATIVE_LIMIT = 0.1

# section -> key -> parser
FLOAT, COMPLEX, INT, STR = "float", "complex", "int", "str"
SCHEMA = {
    "physical": {
        "delta1": FLOAT, "delta2": FLOAT, "omega2": COMPLEX, "alpha0": FLOAT,
        "optical_depth": FLOAT, "u": FLOAT, "ku": FLOAT, "length": FLOAT, "k": FLOAT,
        "wavelength": FLOAT, "omega1_peak": FLOAT, "gamma_ab": FLOAT,
        "gamma_ac": FLOAT, "gamma_ad": FLOAT, "omega_pi_peak": FLOAT, "delta_pi": FLOAT,
    },
    "geometry": {"theta": FLOAT, "margin": FLOAT},
    "timeline": {
        "t1": FLOAT, "t2": FLOAT, "t3": FLOAT, "t12": FLOAT, "t23": FLOAT,
        "ku_t12": FLOAT, "tau_pi": FLOAT, "control_lead": FLOAT,
    },
    "signal": {"shape": STR, "duration": FLOAT, "peak": FLOAT, "file": STR,
               "window": FLOAT},
    "solver": {
        "storage_mode": STR, "pi_mode": STR, "pi_shape": STR, "decay_convention": STR,
        "dt_fraction": FLOAT, "storage_dz": FLOAT, "velocity_rule": STR,
        "velocity_nodes": INT, "theta2": FLOAT, "theta3": FLOAT,
        "stage3_direction": INT, "signal_direction": INT, "control_direction": INT,
        "c": FLOAT,
    },
    "sweep": {"param": STR, "values": STR},
    "output": {"directory": STR},
}


def _parse_value(kind, text):
    text = text.strip()
    if kind == FLOAT:
        if text.lower() in ("inf", "+inf"):
            return math.inf
        if text.lower() == "pi":
            return math.pi
        return float(text)
    if kind == COMPLEX:
        val = complex(text.replace(" ", ""))
        return val.real if val.imag == 0 else [val.real, val.imag]
    if kind == INT:
        return int(text)
    return text


def parse_ini(text: str, source: str = "<string>") -> dict:
    """INI text -> nested dict of typed values; all schema issues at once."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                   interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: malformed config ({exc})") from exc
    raw, issues = {}, []
    for section in cp.sections():
        if section not in SCHEMA:
            issues.append(f"unknown section [{section}]")
            continue
        raw[section] = {}
        for key, value in cp.items(section):
            kind = SCHEMA[section].get(key)
            if kind is None:
                issues.append(f"unknown key {section}.{key}")
                continue
            try:
                raw[section][key] = _parse_value(kind, value)
            except ValueError:
                issues.append(f"{section}.{key}: cannot parse {value!r} as {kind}")
    if issues:
        raise ConfigurationError(issues)
    return raw


def load_raw(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    raw = parse_ini(text, str(path))
    raw.setdefault("_base", {})["dir"] = str(path.parent.resolve())
    return raw


def config_hash(raw: dict) -> str:
    clean = {k: v for k, v in raw.items() if not k.startswith("_")}
    blob = json.dumps(clean, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def set_param(raw: dict, path: str, value) -> dict:
    """Copy of ``raw`` with ``section.key`` set; unknown paths are rejected."""
    section, _, key = path.partition(".")
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigurationError(f"unknown parameter path {path!r}")
    out = copy.deepcopy(raw)
    kind = SCHEMA[section][key]
    if isinstance(value, str):
        value = _parse_value(kind, value)
    out.setdefault(section, {})[key] = value
    return out


@dataclass(frozen=True)
class ScenarioConfig:
    physical: PhysicalConfig
    geometry: BeamGeometry
    timeline: ProtocolTimeline
    signal: FieldEnvelope
    options: SolverOptions
    c: float
    output_dir: str
    raw: dict
    hash: str

    def output_path(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)


def _require(sec, key, issues, where):
    if key not in sec:
        issues.append(f"missing {where}.{key}")
        return None
    return sec[key]


def _complex(v):
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _load_samples(path: Path) -> FieldEnvelope:
    rows, header_seen = [], False
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigurationError(f"cannot read signal samples {path}: {exc}") from exc
    with fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(x) for x in row]
            except ValueError:
                if rows or header_seen:
                    raise ConfigurationError(f"{path}: cannot parse row {row!r}") from None
                header_seen = True
                continue
            if len(vals) != 3:
                raise ConfigurationError(f"{path}: rows must be t, re, im")
            rows.append(vals)
    if len(rows) < 4:
        raise ConfigurationError(f"{path}: need at least four samples")
    arr = np.array(rows)
    return signal_from_samples(arr[:, 0], arr[:, 1] + 1j * arr[:, 2])


def build_scenario(raw: dict) -> ScenarioConfig:
    """Construct every object from a parsed config, reporting all problems."""
    issues = []
    phys = dict(raw.get("physical", {}))
    geo = raw.get("geometry", {})
    tl = raw.get("timeline", {})
    sig = raw.get("signal", {})
    sol = dict(raw.get("solver", {}))
    base = Path(raw.get("_base", {}).get("dir", "."))

    # signal first: the geometry and step sizes depend on its bandwidth
    shape = sig.get("shape", "gaussian")
    tau_p = sig.get("duration")
    peak = sig.get("peak", 1e6)
    t1 = tl.get("t1", 0.0)
    dt_fraction = sol.get("dt_fraction", 1 / 20)
    signal = None
    try:
        if shape == "file":
            if "file" not in sig:
                issues.append("signal.file is required for shape = file")
            else:
                signal = _load_samples(base / sig["file"])
                if tau_p is None:
                    tau_p = float(signal.t[-1] - signal.t[0])
        elif tau_p is None:
            issues.append("missing signal.duration")
        else:
            signal = make_signal(shape, t1, tau_p, peak, dt_fraction)
            if "window" in sig:
                keep = np.abs(signal.t - t1) <= sig["window"] * (1 + 1e-12)
                signal = FieldEnvelope(t=signal.t[keep], amplitude=signal.amplitude[:, keep])
    except ConfigurationError as exc:
        issues.extend(exc.issues)
    delta_s = signal.bandwidth if signal is not None else math.nan

    k = phys.pop("k", None)
    wavelength = phys.pop("wavelength", None)
    if k is None and wavelength is not None:
        k = 2 * math.pi / wavelength
    if k is None:
        issues.append("missing physical.k (or physical.wavelength)")
    ku = phys.pop("ku", None)
    if "u" not in phys and ku is not None and k:
        phys["u"] = ku / k
    depth = phys.pop("optical_depth", None)
    phys.setdefault("omega1_peak", peak)
    if "omega2" in phys:
        phys["omega2"] = _complex(phys["omega2"])
    for key in ("delta1", "omega2", "u", "length"):
        _require(phys, key, issues, "physical")
    if depth is None and "alpha0" not in phys:
        issues.append("need physical.alpha0 or physical.optical_depth")

    theta = geo.get("theta")
    margin = geo.get("margin", DEFAULT_MARGIN if theta is None else None)
    if theta is not None and "margin" in geo:
        issues.append("give geometry.theta or geometry.margin, not both")
    geometry = None
    if k and "u" in phys and math.isfinite(delta_s):
        try:
            if theta is None:
                theta = optimal_theta(delta_s, margin, k, phys["u"])
            geometry = BeamGeometry(theta, k)
        except (InfeasibleGeometryError, ConfigurationError) as exc:
            issues.extend(exc.issues)

    physical = None
    if geometry is not None and not any(i.startswith("missing physical") for i in issues):
        eps2 = abs(phys["omega2"] / phys["delta1"]) ** 2 if phys["delta1"] else 0.0
        if depth is not None:
            if eps2 == 0:
                issues.append("optical_depth needs a non-zero omega2")
            else:
                phys["alpha0"] = depth / (phys["length"] * (k / geometry.K) * eps2)
        if "alpha0" in phys:
            try:
                physical = PhysicalConfig(k=k, **phys)
            except TypeError as exc:
                issues.append(str(exc))
    if physical is not None:
        issues.extend(physical.issues())

    timeline = None
    if geometry is not None and physical is not None:
        t2 = tl.get("t2")
        if "ku_t12" in tl:
            t2 = t1 + tl["ku_t12"] / (geometry.K * physical.u)
        elif "t12" in tl:
            t2 = t1 + tl["t12"]
        t3 = tl.get("t3")
        if "t23" in tl and t2 is not None:
            t3 = t2 + tl["t23"]
        if t2 is None or t3 is None:
            issues.append("timeline needs t2 (or t12 / ku_t12) and t3 (or t23)")
        elif tau_p is not None and "tau_pi" in tl:
            timeline = ProtocolTimeline(t1=t1, t2=t2, t3=t3, tau_p=tau_p,
                                        tau_pi=tl["tau_pi"],
                                        control_lead=tl.get("control_lead"))
            issues.extend(timeline.issues(delta_s if math.isfinite(delta_s) else None))
        else:
            issues.append("missing timeline.tau_pi")

    c = sol.pop("c", math.inf)
    try:
        options = SolverOptions(**sol)
        issues.extend(options.issues())
    except TypeError as exc:
        issues.append(str(exc))
        options = SolverOptions()

    # cross-field preconditions
    if geometry is not None and physical is not None and math.isfinite(delta_s):
        ku_val = geometry.K * physical.u
        if not ku_val > delta_s:
            issues.append("bandwidth margin: K u = %.4g rad/s must exceed delta_s = %.4g rad/s"
                          % (ku_val, delta_s))
        alpha_r = raman_absorption(k, geometry.K, physical.omega2, physical.delta1,
                                   physical.alpha0)
        if timeline is not None and alpha_r > 0:
            travel = physical.u * (timeline.t3 - timeline.t1)
            limits = [1 / alpha_r]
            if math.isfinite(c):
                limits.append(c * timeline.tau_p)
            if travel > TRANSPORT_LIMIT * min(limits):
                issues.append("transport bound: u * t13 = %.3g m exceeds %g of the smallest "
                              "relevant length %.3g m" % (travel, TRANSPORT_LIMIT, min(limits)))
        if signal is not None:
            area = float(np.sum(np.abs(signal.amplitude[0])) * signal.dt)
            coh = abs(physical.epsilon) * area
            if coh > PERTURBATIVE_LIMIT:
                issues.append("perturbative limit: peak stored coherence ~%.3g exceeds %g"
                              % (coh, PERTURBATIVE_LIMIT))
    if issues:
        raise ConfigurationError(issues)
    out_dir = raw.get("output", {}).get("directory", "ramanmem-output")
    return ScenarioConfig(physical=physical, geometry=geometry, timeline=timeline,
                          signal=signal, options=options, c=c, output_dir=out_dir,
                          raw=raw, hash=config_hash(raw))


def load_scenario(path) -> ScenarioConfig:
    return build_scenario(load_raw(path))


def with_overrides(scenario: ScenarioConfig, **solver) -> ScenarioConfig:
    return replace(scenario, options=replace(scenario.options, **solver))
