"""Command-line entry point.

    pevgrid run --config run.yaml [--seed N] [--iterations N]
                [--scenario 1..10 | --pl PCT --area AREA] [--out DIR]
    pevgrid benchmark --config run.yaml [--out DIR]
    pevgrid sweep --config run.yaml --pl 50,100,200,300 [--area AREA] [--out DIR]
    pevgrid validate --config run.yaml

Exit codes: 0 ok, 1 input error, 2 power-flow non-convergence.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import harness as h
from .ingest import InputError, RunBundle, load_config
from .network import PowerFlowError
from .report import emit_report

log = logging.getLogger("pevgrid")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pevgrid", description="PEV charging impact on grid-asset depreciation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="run config (YAML or a previous run_manifest.json); "
                                         "omitted means built-in fixture feeder and base load")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--iterations", type=int)
        if out:
            sp.add_argument("--out", default="out", help="output directory (default: out)")
            sp.add_argument("--no-timeseries", action="store_true", help="skip per-slot plot-data files")

    run = sub.add_parser("run", help="benchmark plus the configured or selected scenario")
    common(run)
    sel = run.add_mutually_exclusive_group()
    sel.add_argument("--scenario", type=int, choices=range(1, 11), metavar="1..10")
    sel.add_argument("--pl", type=float, help="mixed-fleet penetration level in percent")
    run.add_argument("--area", choices=sorted(h.AREA_MIX), default="suburban")

    bench = sub.add_parser("benchmark", help="PEV-free run only")
    common(bench)

    sweep = sub.add_parser("sweep", help="benchmark plus a mixed-fleet penetration-level sweep")
    common(sweep)
    sweep.add_argument("--pl", default="50,100,200,300", help="comma-separated percentages")
    sweep.add_argument("--area", choices=sorted(h.AREA_MIX), default="suburban")

    val = sub.add_parser("validate", help="parse and check inputs without simulating")
    common(val, out=False)
    return p


def _overrides(args) -> dict:
    ov = {"seed": args.seed, "iterations": args.iterations}
    if args.command == "run":
        if args.scenario is not None:
            ov["scenario"] = {"catalog": args.scenario}
        elif args.pl is not None:
            ov["scenario"] = {"pl": args.pl, "area": args.area}
    elif args.command == "sweep":
        try:
            pls = [float(x) for x in args.pl.split(",") if x.strip()]
        except ValueError:
            raise InputError(f"bad --pl list {args.pl!r}") from None
        if not pls or any(x < 0 for x in pls):
            raise InputError(f"bad --pl list {args.pl!r}")
        ov["scenario"] = {"pl": pls, "area": args.area}
    return ov


def execute(bundle: RunBundle, command: str) -> h.AssessmentReport:
    fleets = {} if command == "benchmark" else bundle.fleets
    assets = bundle.params.assets()
    doc = dict(bundle.doc, digests=bundle.digests)
    if command == "benchmark":
        doc["scenario"] = {"catalog": []}
    return h.assess(bundle.config, fleets, bundle.feeder, bundle.base, assets, config_doc=doc)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        bundle = load_config(args.config, _overrides(args))
        bundle.feeder.compiled()
    except ValueError as e:         # InputError, FeederError and parameter validation
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT

    if args.command == "validate":
        c = bundle.feeder.compiled()
        print(f"ok: {len(c.order)} buses, {len(c.reg_pos)} regulators, "
              f"{bundle.config.horizon_slots} slots, scenarios: {', '.join(bundle.fleets)}")
        return EXIT_OK

    try:
        report = execute(bundle, args.command)
    except PowerFlowError as e:
        print(f"power flow did not converge: {e}", file=sys.stderr)
        return EXIT_SOLVER

    manifest = dict(bundle.doc)
    if args.command == "benchmark":
        manifest["scenario"] = {"catalog": []}
    manifest["provenance"] = {"input_digests": bundle.digests}
    try:
        paths = emit_report(report, args.out, manifest, bundle.params.assets(), bundle.config.resolution_h,
                            timeseries=not args.no_timeseries)
    except OSError as e:
        print(f"output error: {e}", file=sys.stderr)
        return EXIT_INPUT
    for r in report.all_results():
        flag = " (eps)" if r.eps_flag else ""
        print(f"{r.label:>24}: LoL {r.yearly_lol_pct:8.3f} %/yr  lifetime {r.lifetime_yr:6.2f} yr{flag}  "
              f"VR ops {r.vr_ops:9.1f}  TCO {r.tco_conventional.total:12.0f} / {r.tco_reestablished.total:12.0f}")
    print(f"wrote {paths['summary'].parent}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
