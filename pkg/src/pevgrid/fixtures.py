"""Synthetic feeder and base-load data used when no utility data is supplied.

The 12-bus feeder has a five-segment main line with six laterals.  Two
regulators sit at 40 % and 60 % of the main-line impedance.  The base load is
a seeded yearly 15-minute profile with residential/commercial daily shape,
summer-peaking seasonality, weekend relief and AR(1) noise.  Its generator
seed is fixed and independent of any Monte Carlo seed.
"""
from __future__ import annotations

import numpy as np

from .network import Branch, Bus, FeederModel
from .regulator import VrConfig

BASE_LOAD_SEED = 20190101


def twelve_bus_feeder(s_r_kva: float = 10_000.0, vr: VrConfig | None = None,
                      phase_shares: tuple[float, ...] = (1.0,)) -> FeederModel:
    vr = vr or VrConfig()
    zm = (0.010, 0.020)     # main segment, pu on 10 MVA
    zl = (0.012, 0.012)     # lateral
    buses = [Bus("sub")]
    branches = []
    main = [f"m{i}" for i in range(1, 6)]
    prev = "sub"
    for i, m in enumerate(main, 1):
        buses.append(Bus(m, 0.05))
        branches.append(Branch(f"b_{m}", prev, m, *zm))
        prev = m
    laterals = {"l1": "m1", "l2": "m2", "l3": "m3", "l4": "m4", "l5": "m5", "l6": "m5"}
    lshare = {"l1": 0.14, "l2": 0.14, "l3": 0.13, "l4": 0.12, "l5": 0.11, "l6": 0.11}
    for lat, at in laterals.items():
        buses.append(Bus(lat, lshare[lat]))
        branches.append(Branch(f"b_{lat}", at, lat, *zl))
    # regulators at the sending ends of m2->m3 (40 %) and m3->m4 (60 %)
    sites = {"b_m3": vr, "b_m4": vr}
    return FeederModel(buses, branches, "sub", v_source_pu=1.0, s_r_kva=s_r_kva,
                       s_base_kva=10_000.0, v_base_kv=12.47, regulator_sites=sites,
                       phase_shares=phase_shares)


def two_bus_feeder(z=(0.01, 0.02), s_base_kva: float = 1000.0, regulator: VrConfig | None = None):
    sites = {"b": regulator} if regulator else {}
    return FeederModel([Bus("1"), Bus("2", 1.0)], [Branch("b", "1", "2", *z)], "1",
                       s_r_kva=s_base_kva, s_base_kva=s_base_kva, regulator_sites=sites)


def synthetic_base_load(horizon_days: int = 365, resolution_h: float = 0.25,
                        peak_kw: float = 11500.0, seed: int = BASE_LOAD_SEED) -> np.ndarray:
    """Substation real power (kW) per slot, scaled so the maximum is ``peak_kw``."""
    per_day = int(round(24 / resolution_h))
    n = horizon_days * per_day
    t = np.arange(n) * resolution_h
    hour = t % 24.0
    day = np.floor(t / 24.0)
    shape = (0.50
             + 0.12 * np.exp(-((hour - 8.0) / 2.0) ** 2)
             + 0.10 * np.exp(-((hour - 13.0) / 3.0) ** 2)
             + 0.30 * np.exp(-((hour - 18.5) / 2.5) ** 2)
             - 0.12 * np.exp(-((hour - 3.5) / 2.5) ** 2))
    season = 1.0 + 0.12 * np.cos(2 * np.pi * (day - 200) / 365.0)
    weekend = np.where((day % 7) >= 5, 0.93, 1.0)
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, 0.012, n)
    noise = np.empty(n)
    acc = 0.0
    phi = 0.9
    for i in range(n):
        acc = phi * acc + eps[i]
        noise[i] = acc
    p = shape * season * weekend * (1.0 + noise)
    return p * (peak_kw / p.max())


def write_feeder_csv(feeder: FeederModel, path) -> None:
    """Branch table in the CLI's feeder CSV layout."""
    import csv
    share = {b.id: b.load_share for b in feeder.buses}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["branch_id", "from_bus", "to_bus", "r_pu", "x_pu", "load_share", "regulator"])
        for br in feeder.branches:
            w.writerow([br.id, br.from_bus, br.to_bus, repr(br.r_pu), repr(br.x_pu),
                        repr(share[br.to_bus]), "yes" if br.id in feeder.regulator_sites else ""])


def write_base_load_csv(p_kw, path, resolution_h: float = 0.25, start: str = "2019-01-01T00:00:00",
                        power_factor: float | None = 0.95) -> None:
    """Base profile as ``timestamp,p_kw[,q_kvar]`` rows."""
    import csv
    import math
    from datetime import datetime, timedelta
    t0 = datetime.fromisoformat(start)
    step = timedelta(hours=resolution_h)
    tan_phi = None if power_factor is None else math.tan(math.acos(power_factor))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "p_kw"] + ([] if tan_phi is None else ["q_kvar"]))
        for n, p in enumerate(p_kw):
            row = [(t0 + n * step).isoformat(), f"{p:.3f}"]
            if tan_phi is not None:
                row.append(f"{p * tan_phi:.3f}")
            w.writerow(row)
