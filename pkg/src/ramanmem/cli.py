"""Command line: run, sweep, validate and predict.

Exit codes: 0 success, 2 invalid configuration or regime, 3 numerical
resolution, 4 acceptance failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .acceptance import run_suite, summary
from .config import OUTPUT_ENV, build_scenario, config_hash, load_raw, set_param
from .errors import ConfigurationError, RamanMemError, ResolutionError
from .oracle import compare, predict
from .protocol import run_protocol

EXIT_OK, EXIT_VALIDATION, EXIT_RESOLUTION, EXIT_ACCEPTANCE = 0, 2, 3, 4


def _jsonable(obj):
    """Replace non-finite floats by strings so the JSON stays standard."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, complex):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def _fmt(x) -> str:
    return repr(float(x))


@dataclass
class RunReport:
    """Everything a run produces apart from traces; wall-clock lives in timing.json."""

    config_hash: str
    stage_energies: dict
    fractions: dict
    echo_time: float
    mirror_overlap: float
    errors: dict
    flags: list
    grid: dict
    geometry: dict
    notes: list
    prediction: dict

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def simulate(scenario):
    """Run one scenario; returns (result, prediction, report)."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = run_protocol(scenario.physical, scenario.geometry, scenario.timeline,
                           scenario.signal, scenario.options, scenario.c)
    pred = predict(scenario.physical, scenario.geometry, scenario.timeline,
                   scenario.signal, scenario.options.theta2, scenario.options.theta3)
    val = compare(res, pred)
    e_in = res.input_energy
    energies = {
        "input": e_in,
        "transmitted": res.transmitted_fraction * e_in,
        "retrieved": res.retrieved_energy_fraction * e_in,
        "excitation": res.stage_populations,
    }
    fractions = {
        "transmitted": res.transmitted_fraction,
        "stored": res.stored_fraction,
        "stored_from_population": res.stored_fraction_population,
        "retrieved": res.retrieved_energy_fraction,
        "residual": res.residual_eta,
    }
    geometry = {"theta": scenario.geometry.theta, "K": res.K, "ku": res.ku,
                "alpha_r": res.alpha_r, "optical_depth": res.optical_depth,
                "delta_s": res.delta_s}
    notes = list(res.notes) + sorted({str(w.message) for w in caught} - set(res.notes))
    pdict = pred.as_dict()
    pdict["variants"] = {k: v for k, v in pdict["variants"].items() if not callable(v)}
    report = RunReport(config_hash=scenario.hash, stage_energies=energies,
                       fractions=fractions, echo_time=res.echo_time,
                       mirror_overlap=res.mirror_overlap, errors=val.rows,
                       flags=val.flags, grid=res.grid, geometry=geometry, notes=notes,
                       prediction=pdict)
    return res, pred, report


def write_trace(path: Path, t, a) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "re", "im", "abs2"])
        for ti, ai in zip(t, a):
            w.writerow([_fmt(ti), _fmt(ai.real), _fmt(ai.imag), _fmt(abs(ai) ** 2)])


def write_snapshots(path: Path, snapshots: dict) -> None:
    """Velocity-resolved coherences at the z = 0 node for every stage."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stage", "level", "harmonic", "v", "re", "im"])
        for stage, st in snapshots.items():
            for level, table in (("ac", st.ac), ("ad", st.ad)):
                for n in sorted(table):
                    for v, s in zip(st.grid.nodes, table[n][0]):
                        w.writerow([stage, level, n, _fmt(v), _fmt(s.real), _fmt(s.imag)])


def write_run(out: Path, res, report: RunReport) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "report.json", report.as_dict())
    store, read = res.storage_field, res.output
    write_trace(out / "storage_z0.csv", store.t, store.amplitude[0])
    write_trace(out / "storage_zL.csv", store.t, store.amplitude[-1])
    write_trace(out / "retrieval_z0.csv", read.t, read.amplitude[0])
    write_trace(out / "retrieval_zL.csv", read.t, read.amplitude[-1])
    write_snapshots(out / "coherence_snapshots.csv", res.snapshots)


# verbs ----------------------------------------------------------------------

def cmd_run(args) -> int:
    t0 = time.perf_counter()
    scenario = build_scenario(load_raw(args.config))
    out = Path(args.output) if args.output else scenario.output_path()
    res, _, report = simulate(scenario)
    write_run(out, res, report)
    _dump(out / "timing.json", {"wall_clock_s": time.perf_counter() - t0})
    f = report.fractions
    print(f"retrieved {f['retrieved']:.6g} (analytic "
          f"{report.prediction['retrieved_energy_fraction']:.6g}), residual "
          f"{f['residual']:.6g}, overlap {report.mirror_overlap:.6g}")
    print(f"wrote {out}")
    return EXIT_OK


def _override(raw: dict, param: str, value) -> dict:
    if param.startswith("geometry.") and "optical_depth" in raw.get("physical", {}):
        # hold the atomic density fixed: a depth given at the base angle becomes alpha0
        base = build_scenario(raw)
        raw = set_param(raw, "physical.alpha0", base.physical.alpha0)
        raw["physical"].pop("optical_depth")
    raw = set_param(raw, param, value)
    # an explicit angle and a margin rule exclude each other
    if param == "geometry.theta":
        raw["geometry"].pop("margin", None)
    elif param == "geometry.margin":
        raw["geometry"].pop("theta", None)
    return raw


def _sweep_row(raw: dict, param: str, value: str):
    scenario = build_scenario(_override(raw, param, value))
    res, pred, _ = simulate(scenario)
    sim, ana = res.retrieved_energy_fraction, pred.retrieved_energy_fraction
    err = abs(sim - ana) / ana if ana else abs(sim)
    return [param, value, _fmt(sim), _fmt(ana), _fmt(err)]


def sweep_rows(raw: dict, param: str, values: list[str], jobs: int = 1) -> list[list]:
    set_param(raw, param, values[0] if values else "0")  # reject unknown paths early
    if jobs > 1 and len(values) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(_sweep_row, [raw] * len(values), [param] * len(values), values))
    return [_sweep_row(raw, param, v) for v in values]


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    raw = load_raw(args.config)
    values = [v for v in (args.values or "").replace(",", " ").split() if v]
    rows = sweep_rows(raw, args.param, values, args.jobs)
    out = Path(args.output) if args.output else _output_dir(raw)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "value", "retrieved", "analytic", "relative_error"])
        w.writerows(rows)
    _dump(out / "timing.json", {"wall_clock_s": time.perf_counter() - t0,
                                "config_hash": config_hash(raw)})
    for r in rows:
        print(",".join(map(str, r)))
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def _output_dir(raw: dict) -> Path:
    return Path(os.environ.get(OUTPUT_ENV)
                or raw.get("output", {}).get("directory", "ramanmem-output"))


def cmd_validate(args) -> int:
    results = run_suite(args.config_dir, args.only)
    for r in results:
        print(r.line())
    summ = summary(results)
    if args.json:
        Path(args.json).write_text(json.dumps(_jsonable(summ), sort_keys=True, indent=2) + "\n")
    return EXIT_OK if summ["passed"] else EXIT_ACCEPTANCE


def cmd_predict(args) -> int:
    scenario = build_scenario(load_raw(args.config))
    pred = predict(scenario.physical, scenario.geometry, scenario.timeline,
                   scenario.signal, scenario.options.theta2, scenario.options.theta3)
    d = pred.as_dict()
    d["variants"] = {k: v for k, v in d["variants"].items() if not callable(v)}
    d["config_hash"] = scenario.hash
    print(json.dumps(_jsonable(d), sort_keys=True, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ramanmem", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="simulate one scenario and write its artifacts")
    r.add_argument("config")
    r.add_argument("--output", help="output directory (overrides config and env)")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="retrieved fraction over a list of parameter values")
    s.add_argument("config")
    s.add_argument("--param", required=True, help="section.key, e.g. physical.optical_depth")
    s.add_argument("--values", default="", help="comma or space separated values")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--output")
    s.set_defaults(func=cmd_sweep)
    v = sub.add_parser("validate", help="run the acceptance suite at the pinned configs")
    v.add_argument("--config-dir")
    v.add_argument("--only", nargs="*")
    v.add_argument("--json", help="write the machine-readable summary here")
    v.set_defaults(func=cmd_validate)
    q = sub.add_parser("predict", help="closed-form predictions only")
    q.add_argument("config")
    q.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        for issue in exc.issues:
            print(f"error: {issue}", file=sys.stderr)
        return EXIT_VALIDATION
    except ResolutionError as exc:
        print(f"resolution error: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION
    except RamanMemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
