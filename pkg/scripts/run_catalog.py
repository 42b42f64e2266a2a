"""Run the benchmark and any of the ten catalog scenarios on the fixture feeder.

Prints a lifetime table and checks the scenario orderings the acceptance
suite asserts.  Full year, 100 iterations takes a few minutes per scenario.
"""
import argparse
import time

from pevgrid import charging as ch
from pevgrid import fixtures as fx
from pevgrid import harness as h


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenarios", default="1,4,5", help="comma-separated catalog indices")
    ap.add_argument("--iterations", type=int, default=100)
    ap.add_argument("--days", type=int, default=365)
    ap.add_argument("--seed", type=int, default=2019)
    args = ap.parse_args()

    feeder = fx.twelve_bus_feeder()
    base = h.base_bus_loads(feeder, fx.synthetic_base_load(args.days))
    cfg = h.McsConfig(iterations=args.iterations, master_seed=args.seed, horizon_days=args.days, batch_size=50)
    fleets = {f"scenario_{k}": [ch.catalog(int(k))] for k in args.scenarios.split(",")}
    t0 = time.perf_counter()
    rep = h.assess(cfg, fleets, feeder, base)
    print(f"{'scenario':>12} {'LoL %/yr':>10} {'life yr':>8} {'VR ops/yr':>10} {'TCO conv':>11} {'TCO re-est':>11}")
    for r in rep.all_results():
        life = "eps" if r.eps_flag else f"{r.lifetime_yr:.2f}"
        print(f"{r.label:>12} {r.yearly_lol_pct:10.3f} {life:>8} {r.vr_ops:10.1f} "
              f"{r.tco_conventional.total:11.0f} {r.tco_reestablished.total:11.0f}")
    print(f"elapsed {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
