"""Penetration-level sweep of conventional vs re-established transformer TCO."""
import argparse

from pevgrid import fixtures as fx
from pevgrid import harness as h


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--area", choices=sorted(h.AREA_MIX), default="suburban")
    ap.add_argument("--pl", default=",".join(f"{x:g}" for x in h.PL_SWEEP))
    ap.add_argument("--iterations", type=int, default=20)
    ap.add_argument("--seed", type=int, default=2019)
    args = ap.parse_args()

    feeder = fx.twelve_bus_feeder()
    p = fx.synthetic_base_load()
    base = h.base_bus_loads(feeder, p)
    cfg = h.McsConfig(iterations=args.iterations, master_seed=args.seed, batch_size=50)
    peak = float(p.max())
    print(f"{'PL %':>6} {'slow':>6} {'fast':>5} {'LoL %/yr':>9} {'L_x':>6} {'conv $':>10} {'re-est $':>10} {'gap $':>9}")
    for pl in (float(x) for x in args.pl.split(",")):
        spec = h.MixedFleetSpec.for_area(args.area, pl, peak)
        r = h.run_mcs(cfg, h.mixed_fleet(spec), feeder, base)
        conv, reest = r.tco_conventional.total, r.tco_reestablished.total
        slow, fast = h.build_mixed_fleet(spec)
        print(f"{pl:6g} {slow:6d} {fast:5d} {r.yearly_lol_pct:9.3f} {r.tco_reestablished.extra['l_x']:6.2f} "
              f"{conv:10.0f} {reest:10.0f} {reest - conv:9.0f}")


if __name__ == "__main__":
    main()
