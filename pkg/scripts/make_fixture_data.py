"""Write the synthetic 12-bus feeder and yearly base load as CSV under configs/data/."""
import argparse
from pathlib import Path

from pevgrid import fixtures as fx

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "configs" / "data"))
    ap.add_argument("--peak-kw", type=float, default=11_500.0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fx.write_feeder_csv(fx.twelve_bus_feeder(), out / "feeder_12bus.csv")
    fx.write_base_load_csv(fx.synthetic_base_load(peak_kw=args.peak_kw), out / "base_load_2019.csv")
    print(f"wrote {out / 'feeder_12bus.csv'} and {out / 'base_load_2019.csv'}")


if __name__ == "__main__":
    main()
