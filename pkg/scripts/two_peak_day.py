"""One synthetic two-peak day: hourly table of load, generation and DER output.

    python3 scripts/two_peak_day.py [--no-disturbance]
"""

import argparse

import numpy as np

from der_mpc.battery import table1_fleet
from der_mpc.harness import run, synthetic_scenario
from der_mpc.mpc import MpcConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--no-disturbance", action="store_true")
    ap.add_argument("--kappa-g", type=float, default=10.0)
    args = ap.parse_args()

    scenario = synthetic_scenario(table1_fleet(), days=1, config=MpcConfig(kappa_g=args.kappa_g),
                                  disturbance_std_gw=0.0 if args.no_disturbance else 0.3)
    res = run(scenario)
    print("hour   load_gw   g_gw  " + "  ".join(f"{i:>7s}" for i in res.ids))
    for h in range(24):
        k = slice(12 * h, 12 * h + 12)
        p = res.p[:, k].mean(axis=1)
        print(f"{h:4d}  {res.load[k].mean():8.2f} {res.g[k].mean():7.2f}  "
              + "  ".join(f"{v:7.2f}" for v in p))
    m = res.metrics
    print(f"\nmax ramp per step: load {m['max_ramp_load_gw_per_step']:.3f} GW, "
          f"generation {m['max_ramp_g_gw_per_step']:.3f} GW (ratio {m['ramp_ratio']:.3f})")
    print(f"rms deviation from mean: load {m['rms_load_deviation_gw']:.2f} GW, "
          f"generation {m['rms_g_deviation_gw']:.2f} GW; generation spread {np.ptp(res.g):.2f} GW")


if __name__ == "__main__":
    main()
