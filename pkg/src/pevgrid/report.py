"""Report files: summary.csv, costs.csv, timeseries/*.csv and run_manifest.json.

Floats are written with ``repr`` (shortest round-trip form) so identical
inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .harness import AssessmentReport, ScenarioResult

SUMMARY_COLUMNS = ("scenario", "yearly_lol_pct", "lifetime_yr", "eps_flag", "vr_ops", "vr_lol",
                   "tco_conventional", "tco_reestablished", "pl_percent", "pl_observed_percent", "iterations")
COST_COLUMNS = ("scenario", "component", "term", "window_start_yr", "window_end_yr", "dollars")


def _f(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x} in report")
    return repr(x)


def summary_row(r: ScenarioResult) -> list[str]:
    return [r.label, _f(r.yearly_lol_pct), _f(r.lifetime_yr), str(r.eps_flag).lower(), _f(r.vr_ops),
            _f(r.vr_lol), _f(r.tco_conventional.total), _f(r.tco_reestablished.total),
            _f(r.pl_percent), _f(r.pl_observed_percent), str(r.iterations)]


def cost_rows(r: ScenarioResult) -> list[list[str]]:
    out = []
    for bd in (r.tco_conventional, r.tco_reestablished):
        for scen, comp, term, t1, t2, dollars in bd.rows(r.label):
            out.append([scen, comp, term, _f(t1), _f(t2), _f(dollars)])
    t2 = r.tco_reestablished.t2
    for vr in r.tco_vr:
        out.append([r.label, f"vr_{vr['regulator']}", "replacement", _f(0.0), _f(t2), _f(vr["dollars"])])
    return out


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_timeseries(r: ScenarioResult, path: Path, resolution_h: float, dt_h: float, aging):
    from .thermal import faa
    acc = np.cumsum(faa(r.theta_hst, aging) * dt_h) / aging.t_ins_hours
    taps = r.taps_example[0]            # first phase of iteration 0
    header = ["slot", "hour", "mean_k", "theta_to", "theta_hst", "cumulative_lol", "mean_pev_kw"]
    names = [vr["regulator"] for vr in r.tco_vr] or [str(i) for i in range(taps.shape[1])]
    header += [f"tap_{n}" for n in names]
    pev = r.mean_pev_kw if r.mean_pev_kw is not None else np.zeros_like(r.mean_k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in range(r.mean_k.size):
            w.writerow([t, f"{t * resolution_h:.2f}", f"{r.mean_k[t]:.9f}", f"{r.theta_to[t]:.6f}",
                        f"{r.theta_hst[t]:.6f}", f"{acc[t]:.9e}", f"{pev[t]:.4f}",
                        *(str(int(h)) for h in taps[t])])


def emit_report(report: AssessmentReport, outdir, manifest: dict, assets=None, resolution_h: float = 0.25,
                timeseries: bool = True) -> dict:
    """Write every report file; returns the paths written."""
    from .harness import AssetParams
    assets = assets or AssetParams()
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "timeseries").mkdir(exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out}: {e.strerror}") from None
    results = report.all_results()
    paths = {"summary": out / "summary.csv", "costs": out / "costs.csv", "manifest": out / "run_manifest.json"}
    _write_csv(paths["summary"], SUMMARY_COLUMNS, [summary_row(r) for r in results])
    _write_csv(paths["costs"], COST_COLUMNS, [row for r in results for row in cost_rows(r)])
    if timeseries:
        for r in results:
            p = out / "timeseries" / f"{r.label}.csv"
            write_timeseries(r, p, resolution_h, resolution_h, assets.aging)
            paths[f"ts_{r.label}"] = p
    deltas = {r.label: {k: float(v) for k, v in report.delta(r).items()} for r in report.scenarios}
    doc = dict(manifest)
    doc["provenance"] = {"package_version": __version__, "seed": report.seed, "config_hash": report.config_hash,
                         "benchmark_deltas": deltas, **manifest.get("provenance", {})}
    paths["manifest"].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return paths
