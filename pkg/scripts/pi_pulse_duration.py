"""Finite versus impulsive transfer pulses as a function of pulse duration.

For each delta_s * tau_pi the worst per-class amplitude error of a square
transfer pulse is compared with the first-order estimate K v tau_pi / pi at
the band edge, and the end-to-end read-out is compared with the impulsive run.

    python3 scripts/pi_pulse_duration.py [--out DIR]
"""

import argparse
import csv
import math
from dataclasses import replace
from pathlib import Path

from ramanmem.acceptance import default_config_dir
from ramanmem.config import build_scenario, load_raw, set_param
from ramanmem.core import velocity_grid_for
from ramanmem.dynamics import PiPulseSpec, integrate_storage_adiabatic, pi_transfer_error
from ramanmem.protocol import relative_difference, run_protocol


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(default_config_dir() / "broadband.ini"))
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    raw = set_param(load_raw(args.config), "physical.optical_depth", 2.0)
    sc = build_scenario(raw)
    ds, K = sc.signal.bandwidth, sc.geometry.K
    grid = velocity_grid_for(sc.physical.u, K * sc.physical.u * (sc.signal.t[-1] - sc.signal.t[0]))
    stored = integrate_storage_adiabatic(sc.signal.t, sc.signal.amplitude[0], sc.physical.omega2,
                                         sc.physical.delta1, None, 0.0, grid, K)
    rows = []
    for x in (0.0025, 0.005, 0.01, 0.02, 0.05, 0.1):
        tau = x / ds
        spec = PiPulseSpec.with_area(math.pi, tau, sc.physical.pi_detuning)
        err = pi_transfer_error(stored, spec, K, tau / 50)
        sc_x = build_scenario(set_param(raw, "timeline.tau_pi", tau))
        imp = run_protocol(sc_x.physical, sc_x.geometry, sc_x.timeline, sc_x.signal, sc_x.options)
        fin = run_protocol(sc_x.physical, sc_x.geometry, sc_x.timeline, sc_x.signal,
                           replace(sc_x.options, pi_mode="finite"))
        diff = relative_difference(fin.output, imp.output)
        rows.append([x, err, x / math.pi, diff, fin.retrieved_energy_fraction,
                     imp.retrieved_energy_fraction])
        print("delta_s tau_pi=%-7g class error %.3e (K v tau/pi at band edge %.3e)  "
              "read-out change %.3e" % (x, err, x / math.pi, diff))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "pi_pulse_duration.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta_s_tau_pi", "class_error", "first_order_estimate",
                    "readout_relative_change", "retrieved_finite", "retrieved_impulsive"])
        w.writerows([[repr(float(v)) for v in r] for r in rows])


if __name__ == "__main__":
    main()
