"""Run configuration, parameter file, feeder and base-load CSV ingestion.

Every schema problem raises :class:`InputError` carrying the file, line and
column it was found at, so the CLI can report it and exit with status 1.
"""
from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field, fields, replace
from datetime import datetime
from pathlib import Path

import numpy as np
import yaml

from . import charging as ch
from . import economics as econ
from . import fixtures as fx
from . import thermal as th
from .harness import (AREA_MIX, AssetParams, ExpectationMode, McsConfig, MixedFleetSpec, base_bus_loads,
                      mixed_fleet)
from .network import Branch, Bus, BusLoads, FeederError, FeederModel
from .regulator import VrConfig

log = logging.getLogger(__name__)

BUILTIN_FEEDER = "builtin:twelve_bus"
BUILTIN_BASE = "builtin:synthetic"


class InputError(ValueError):
    def __init__(self, message: str, file=None, line: int | None = None, column: str | int | None = None):
        self.file, self.line, self.column = file, line, column
        where = ":".join(str(x) for x in (file, line, column) if x is not None)
        super().__init__(f"{where}: {message}" if where else message)


# name -> (default, provenance, destination)
PARAMETERS = {
    "s_r": (10_000.0, "PAPER", "rating"),
    "c_o": (70_000.0, "PAPER", "tco"),
    "cl": (13.2, "PAPER", "tco"),
    "ll": (53.0, "PAPER", "tco"),
    "dc": (120.0, "PAPER", "tco"),
    "rf": (0.81, "PAPER", "tco"),
    "ec": (0.05, "PAPER", "tco"),
    "gamma": (0.2, "PAPER", "tco"),
    "i": (0.05, "PAPER", "tco"),
    "n_hours": (8760.0, "DEFAULT", "tco"),
    "vr_c_o": (60_000.0, "DEFAULT", "tco"),
    "t_ins_hours": (th.T_INS_HOURS, "PAPER", "aging"),
    "alpha": (15000.0 / 383.0, "DEFAULT", "aging"),
    "beta": (15000.0, "DEFAULT", "aging"),
    "omega": (273.0, "DEFAULT", "aging"),
    "dtheta_to_rated": (55.0, "DEFAULT", "thermal"),
    "dtheta_h_rated": (25.0, "DEFAULT", "thermal"),
    "tau_to": (3.5, "DEFAULT", "thermal"),
    "tau_h": (0.08, "DEFAULT", "thermal"),
    "oil_exponent_x": (0.8, "DEFAULT", "thermal"),
    "winding_exponent_y": (1.6, "DEFAULT", "thermal"),
    "theta_ambient": (30.0, "DEFAULT", "thermal"),
    "kappa": (0.0065, "PAPER", "vr"),
    "v_regulated": (1.0, "DEFAULT", "vr"),
    "h_min": (-16, "DEFAULT", "vr"),
    "h_max": (16, "DEFAULT", "vr"),
    "n_op_max": (1e6, "DEFAULT", "vr"),
    "pev_power_factor": (0.95, "DEFAULT", "load"),
    "base_power_factor": (0.95, "DEFAULT", "load"),
}


@dataclass
class ParamSet:
    values: dict
    provenance: dict

    def assets(self) -> AssetParams:
        v = self.values
        pick = lambda dest: {k: v[k] for k, (_, _, d) in PARAMETERS.items() if d == dest}
        thermal = th.ThermalParams(s_r=v["s_r"], loss_ratio_r=v["ll"] / v["cl"], **pick("thermal"))
        aging = th.AgingParams(**pick("aging"))
        tco = econ.TcoParams(s_r=v["s_r"], t_ins_years=aging.t_ins_years, **pick("tco"))
        return AssetParams(thermal, aging, tco)

    def vr(self) -> VrConfig:
        v = self.values
        return VrConfig(v_regulated=v["v_regulated"], kappa=v["kappa"], h_min=int(v["h_min"]),
                        h_max=int(v["h_max"]), n_op_max=v["n_op_max"])


def load_params(source, file=None) -> ParamSet:
    """Defaults overlaid with a flat mapping (or YAML file) of overrides."""
    values = {k: d for k, (d, _, _) in PARAMETERS.items()}
    prov = {k: p for k, (_, p, _) in PARAMETERS.items()}
    if source is None:
        return ParamSet(values, prov)
    if isinstance(source, (str, Path)):
        file = Path(source)
        source = _read_yaml(file)
    if not isinstance(source, dict):
        raise InputError("parameter document must be a mapping", file)
    for key, val in source.items():
        if key not in PARAMETERS:
            raise InputError(f"unknown parameter {key!r}", file, column=key)
        if isinstance(val, dict):           # manifest form {value, provenance}
            val, tag = val.get("value"), val.get("provenance", "USER")
        else:
            tag = "USER" if val != values[key] else prov[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise InputError(f"parameter {key!r} must be a finite number", file, column=key)
        values[key] = val
        prov[key] = tag
    return ParamSet(values, prov)


def _read_yaml(path: Path):
    try:
        text = path.read_text()
    except OSError as e:
        raise InputError(f"cannot read: {e.strerror}", path) from None
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise InputError(f"malformed YAML: {getattr(e, 'problem', e)}", path,
                         mark.line + 1 if mark else None, mark.column + 1 if mark else None) from None


# ---------------------------------------------------------------- feeder CSV

FEEDER_COLUMNS = ("branch_id", "from_bus", "to_bus", "r_pu", "x_pu", "load_share")
_TRUE = {"1", "true", "yes", "y", "x"}


def _rows(path: Path, required):
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise InputError(f"cannot read: {e.strerror}", path) from None
    with fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        reader.fieldnames = header
        missing = [c for c in required if c not in header]
        if missing:
            raise InputError(f"missing column(s) {', '.join(missing)}", path, 1)
        for row in reader:
            yield reader.line_num, {k: (v or "").strip() for k, v in row.items() if k is not None}, header


def _num(text: str, path, line, col, *, nonneg=False) -> float:
    try:
        x = float(text)
    except ValueError:
        raise InputError(f"not a number: {text!r}", path, line, col) from None
    if not math.isfinite(x) or (nonneg and x < 0):
        raise InputError(f"invalid value {text!r}", path, line, col)
    return x


def load_feeder(path, *, substation: str | None = None, s_r_kva: float = 10_000.0,
                s_base_kva: float = 10_000.0, v_base_kv: float = 12.47, v_source_pu: float = 1.0,
                vr: VrConfig | None = None, phase_shares=(1.0,)) -> FeederModel:
    """Branch table with the receiving bus's load share and a regulator flag."""
    path = Path(path)
    vr = vr or VrConfig()
    branches, buses, sites = [], {}, {}
    seen_branch = set()
    from_buses = []
    for line, row, header in _rows(path, FEEDER_COLUMNS):
        bid = row["branch_id"]
        if not bid:
            raise InputError("empty branch_id", path, line, "branch_id")
        if bid in seen_branch:
            raise InputError(f"duplicate branch id {bid!r}", path, line, "branch_id")
        seen_branch.add(bid)
        to = row["to_bus"]
        if not to or not row["from_bus"]:
            raise InputError("empty bus id", path, line, "to_bus" if not to else "from_bus")
        if to in buses:
            raise InputError(f"duplicate bus id {to!r}", path, line, "to_bus")
        r = _num(row["r_pu"], path, line, "r_pu", nonneg=True)
        x = _num(row["x_pu"], path, line, "x_pu", nonneg=True)
        share = _num(row["load_share"] or "0", path, line, "load_share", nonneg=True)
        buses[to] = share
        from_buses.append(row["from_bus"])
        branches.append(Branch(bid, row["from_bus"], to, r, x))
        if row.get("regulator", "").lower() in _TRUE:
            sites[bid] = vr
    if not branches:
        raise InputError("feeder has no branches", path)
    if substation is None:
        roots = sorted({b for b in from_buses if b not in buses})
        if len(roots) != 1:
            raise InputError(f"cannot infer substation; candidate roots {roots}", path)
        substation = roots[0]
    if substation in buses:
        raise InputError(f"substation {substation!r} appears as a to_bus", path)
    bus_list = [Bus(substation)] + [Bus(b, s) for b, s in buses.items()]
    feeder = FeederModel(bus_list, branches, substation, v_source_pu=v_source_pu, s_r_kva=s_r_kva,
                         s_base_kva=s_base_kva, v_base_kv=v_base_kv, regulator_sites=sites,
                         phase_shares=tuple(phase_shares))
    try:
        feeder.compiled()
    except FeederError as e:
        raise InputError(str(e), path) from None
    return feeder


# ---------------------------------------------------------------- base load

@dataclass
class BaseProfile:
    p_kw: np.ndarray
    q_kvar: np.ndarray | None
    resolution_h: float


def load_base_csv(path, expected_slots: int, resolution_h: float = 0.25) -> BaseProfile:
    """Substation base load with a ``slot`` or ISO-8601 ``timestamp`` column."""
    path = Path(path)
    p, q, idx = [], [], []
    has_q = None
    key = None
    for line, row, header in _rows(path, ("p_kw",)):
        if key is None:
            key = "slot" if "slot" in header else "timestamp" if "timestamp" in header else None
            if key is None:
                raise InputError("need a 'slot' or 'timestamp' column", path, 1)
            has_q = "q_kvar" in header
        if key == "slot":
            try:
                idx.append(int(row["slot"]))
            except ValueError:
                raise InputError(f"bad slot index {row['slot']!r}", path, line, "slot") from None
        else:
            try:
                idx.append(datetime.fromisoformat(row["timestamp"]))
            except ValueError:
                raise InputError(f"bad ISO-8601 timestamp {row['timestamp']!r}", path, line, "timestamp") from None
        p.append(_num(row["p_kw"], path, line, "p_kw", nonneg=True))
        if has_q:
            q.append(_num(row["q_kvar"], path, line, "q_kvar", nonneg=True))
        _check_spacing(idx, key, resolution_h, path, line)
    if len(p) != expected_slots:
        raise InputError(f"expected {expected_slots} slots at {resolution_h} h resolution, found {len(p)} rows", path)
    if not has_q:
        log.warning("%s: no q_kvar column; reactive power filled from the default power factor", path)
    return BaseProfile(np.array(p), np.array(q) if has_q else None, resolution_h)


def _check_spacing(idx, key, res, path, line):
    n = len(idx)
    if key == "slot":
        if idx[-1] != n - 1:
            raise InputError(f"slot {idx[-1]} out of sequence (expected {n - 1})", path, line, "slot")
    elif n > 1:
        step = (idx[-1] - idx[-2]).total_seconds() / 3600.0
        if abs(step - res) > 1e-9:
            raise InputError(f"timestamp spacing {step} h does not match resolution {res} h",
                             path, line, "timestamp")


# ---------------------------------------------------------------- run config

@dataclass
class RunBundle:
    config: McsConfig
    feeder: FeederModel
    base: BusLoads
    base_p_kw: np.ndarray
    params: ParamSet
    fleets: dict            # label -> list[ChargingScenario]
    doc: dict               # normalized config, re-ingestible
    digests: dict = field(default_factory=dict)


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _resolve(base_dir: Path, p):
    if p is None or str(p).startswith("builtin:"):
        return p
    q = Path(p)
    return str(q if q.is_absolute() else (base_dir / q).resolve())


def behavior_from(doc, file=None) -> ch.BehaviorDistributions:
    if not doc:
        return ch.BehaviorDistributions()
    names = {f.name for f in fields(ch.BehaviorDistributions)}
    bad = sorted(set(doc) - names)
    if bad:
        raise InputError(f"unknown behavior field(s) {bad}", file, column=bad[0])
    kw = dict(doc)
    if "service_window" in kw:
        kw["service_window"] = tuple(kw["service_window"])
    if "avg_speed_by_period" in kw:
        kw["avg_speed_by_period"] = tuple(tuple(p) for p in kw["avg_speed_by_period"])
    try:
        return ch.BehaviorDistributions(**kw)
    except (TypeError, ValueError) as e:
        raise InputError(f"behavior: {e}", file) from None


def fleets_from(scenario: dict, base_peak_kw: float, behavior, file=None) -> dict:
    """Exactly one of ``catalog``, ``pl`` (+ ``area``) or ``custom``."""
    forms = [k for k in ("catalog", "pl", "custom") if k in scenario]
    if len(forms) != 1:
        raise InputError("scenario must give exactly one of catalog, pl, custom", file, column="scenario")
    form = forms[0]
    try:
        if form == "catalog":
            idx = scenario["catalog"]
            idx = idx if isinstance(idx, list) else [idx]
            return {f"scenario_{int(k)}": [ch.catalog(int(k), behavior)] for k in idx}
        if form == "pl":
            area = scenario.get("area", "suburban")
            if area not in AREA_MIX:
                raise InputError(f"unknown area {area!r}", file, column="area")
            pls = scenario["pl"] if isinstance(scenario["pl"], list) else [scenario["pl"]]
            return {f"{area}_pl{float(pl):g}": mixed_fleet(MixedFleetSpec.for_area(area, float(pl), base_peak_kw),
                                                          behavior) for pl in pls}
        out = []
        for i, spec in enumerate(scenario["custom"]):
            spec = dict(spec)
            spec["vehicle_class"] = ch.VehicleClass(spec["vehicle_class"])
            out.append(ch.ChargingScenario(behavior=behavior, **spec))
        return {scenario.get("label", "custom"): out}
    except InputError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise InputError(f"scenario: {e}", file, column=form) from None


CONFIG_KEYS = {"seed", "iterations", "horizon_days", "resolution_h", "expectation_mode", "batch_size",
               "feeder", "base_load", "params", "scenario", "behavior", "provenance"}


def load_config(path=None, overrides: dict | None = None) -> RunBundle:
    """Read a YAML/JSON run config (or an emitted manifest) into a run bundle."""
    if path is None:
        doc, base_dir, file = {}, Path.cwd(), None
    else:
        file = Path(path)
        doc = _read_yaml(file) or {}
        base_dir = file.parent
    if not isinstance(doc, dict):
        raise InputError("config must be a mapping", file)
    unknown = sorted(set(doc) - CONFIG_KEYS)
    if unknown:
        raise InputError(f"unknown config key(s) {unknown}", file, column=unknown[0])
    doc = {k: v for k, v in doc.items() if k != "provenance"}
    for k, v in (overrides or {}).items():
        if v is not None:
            doc[k] = v
    return bundle_from_doc(doc, base_dir, file)


def bundle_from_doc(doc: dict, base_dir: Path, file=None) -> RunBundle:
    try:
        config = McsConfig(
            iterations=int(doc.get("iterations", 100)),
            master_seed=int(doc.get("seed", 0)),
            horizon_days=int(doc.get("horizon_days", 365)),
            resolution_h=float(doc.get("resolution_h", 0.25)),
            expectation_mode=ExpectationMode(doc.get("expectation_mode", ExpectationMode.MEAN_K_THEN_MODEL.value)),
            batch_size=int(doc.get("batch_size", 50)),
        )
    except (TypeError, ValueError) as e:
        raise InputError(f"config: {e}", file) from None

    params_src = doc.get("params")
    if isinstance(params_src, str):
        params_src = Path(_resolve(base_dir, params_src))
    params = load_params(params_src, file if isinstance(params_src, dict) else None)
    vr = params.vr()
    s_r = params.values["s_r"]

    fdoc = doc.get("feeder", BUILTIN_FEEDER)
    fdoc = {"path": fdoc} if isinstance(fdoc, str) else dict(fdoc)
    fdoc["path"] = _resolve(base_dir, fdoc.get("path", BUILTIN_FEEDER))
    digests = {}
    if fdoc["path"] == BUILTIN_FEEDER:
        feeder = fx.twelve_bus_feeder(s_r, vr, tuple(fdoc.get("phase_shares", (1.0,))))
    else:
        opts = {k: fdoc[k] for k in ("substation", "s_base_kva", "v_base_kv", "v_source_pu") if k in fdoc}
        feeder = load_feeder(fdoc["path"], s_r_kva=s_r, vr=vr,
                             phase_shares=tuple(fdoc.get("phase_shares", (1.0,))), **opts)
        digests["feeder"] = sha256_file(fdoc["path"])

    bdoc = doc.get("base_load", BUILTIN_BASE)
    bdoc = {"path": bdoc} if isinstance(bdoc, str) else dict(bdoc)
    bdoc["path"] = _resolve(base_dir, bdoc.get("path", BUILTIN_BASE))
    if bdoc["path"] == BUILTIN_BASE:
        p = fx.synthetic_base_load(config.horizon_days, config.resolution_h,
                                   float(bdoc.get("peak_kw", 11_500.0)), int(bdoc.get("seed", fx.BASE_LOAD_SEED)))
        q = None
    else:
        prof = load_base_csv(bdoc["path"], config.horizon_slots, config.resolution_h)
        p, q = prof.p_kw, prof.q_kvar
        digests["base_load"] = sha256_file(bdoc["path"])
    base = base_bus_loads(feeder, p, q, params.values["base_power_factor"], config.resolution_h)
    config = replace(config, pev_power_factor=params.values["pev_power_factor"])

    behavior = behavior_from(doc.get("behavior"), file)
    scenario = doc.get("scenario", {"catalog": 1})
    if not isinstance(scenario, dict):
        raise InputError("scenario must be a mapping", file, column="scenario")
    fleets = fleets_from(scenario, float(np.max(p)), behavior, file)

    norm = {
        "seed": config.master_seed, "iterations": config.iterations, "horizon_days": config.horizon_days,
        "resolution_h": config.resolution_h, "expectation_mode": config.expectation_mode.value,
        "batch_size": config.batch_size, "feeder": fdoc, "base_load": bdoc,
        "params": {k: {"value": params.values[k], "provenance": params.provenance[k]} for k in PARAMETERS},
        "scenario": scenario, "behavior": doc.get("behavior") or {},
    }
    return RunBundle(config, feeder, base, p, params, fleets, norm, digests)
