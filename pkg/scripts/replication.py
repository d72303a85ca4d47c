"""Seven-day closed-loop replication with the stock fleet.

Runs the MPC scenario and its DERs-disabled baseline on the synthetic
two-peak series with disturbance injection, writes both trajectory sets and
metrics, and prints the comparison.

    python3 scripts/replication.py --out-dir out/replication --days 7
"""

import argparse
import time
from pathlib import Path

from der_mpc.battery import table1_fleet
from der_mpc.harness import compare, run, synthetic_scenario, write_metrics, write_trajectories
from der_mpc.mpc import MpcConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--out-dir", type=Path, default=Path("out/replication"))
    ap.add_argument("--days", type=float, default=7.0)
    ap.add_argument("--kappa-g", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    scenario = synthetic_scenario(table1_fleet(), days=args.days,
                                  config=MpcConfig(288, 6, args.kappa_g), seed=args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)

    tic = time.perf_counter()
    mpc = run(scenario)
    elapsed = time.perf_counter() - tic
    base = run(scenario.baseline())
    for prefix, result in (("", mpc), ("baseline_", base)):
        write_trajectories(result, args.out_dir / f"{prefix}trajectories.csv")
        write_metrics(result.metrics, args.out_dir / f"{prefix}metrics.txt")
    write_metrics(compare(base, mpc), args.out_dir / "comparison.txt")

    m = mpc.metrics
    print(f"{m['steps']} steps, {m['mpc_iterations']} MPC iterations in {elapsed:.1f} s")
    print(f"max ramp: load {m['max_ramp_load_gw_per_hour']:.2f} GW/h, generation {m['max_ramp_g_gw_per_hour']:.2f} GW/h "
          f"(ratio {m['ramp_ratio']:.3f})")
    print(f"balance residual {m['max_balance_residual_gw']:.1e} GW; "
          f"violations soc={m['soc_violations']} power={m['power_violations']}")
    for pid in mpc.ids:
        print(f"  {pid:6s} peak SoC {100 * m[f'soc_peak_fraction.{pid}']:5.1f}% of C, "
              f"net energy supplied {m[f'energy_supplied_gwh.{pid}']:8.2f} GWh")
    print(f"outputs in {args.out_dir}")


if __name__ == "__main__":
    main()
