"""Stochastic PEV charging sessions and fleet load profiles.

Three behaviours are modelled:

* slow-charging commuters plug in at home on arrival and replace the day's
  driving energy;
* fast-charging commuters let the battery run down over several days and
  top up en route (morning or evening trip, equally likely) once the state of
  charge drops below the range-anxiety threshold;
* ride-service vehicles drive through a service window and recharge en route
  whenever the threshold is crossed.

Every vehicle owns an independent random stream derived from
``(seed, *key, vehicle_id)`` so a fleet is reproducible vehicle by vehicle.
The day-level samplers and the fleet generator share the same array kernels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

SLOW_KW = 19.2
FAST_KW = 120.0
SHORT_RANGE_KWH = 40.0
LONG_RANGE_KWH = 60.0
MAX_REDRAWS = 10


class VehicleClass(str, Enum):
    COMMUTER = "commuter"
    RIDE_SERVICE = "ride_service"


@dataclass(frozen=True)
class BehaviorDistributions:
    depart_mean: float = 7.5
    depart_sd: float = 1.0
    arrive_mean: float = 17.5
    arrive_sd: float = 1.0
    miles_mean: float = 32.0
    miles_sd: float = 12.0
    energy_per_mile: float = 0.30           # kWh/mi
    service_window: tuple[float, float] = (7.0, 21.0)
    # (start h, end h, mph); periods tile the service window
    avg_speed_by_period: tuple[tuple[float, float, float], ...] = (
        (7.0, 10.0, 22.0), (10.0, 16.0, 28.0), (16.0, 19.0, 20.0), (19.0, 21.0, 26.0))
    speed_sd_frac: float = 0.15             # day-to-day spread of ride-service speeds

    def __post_init__(self):
        if not self.arrive_mean > self.depart_mean:
            raise ValueError("mean arrival must follow mean departure")
        if min(self.depart_sd, self.arrive_sd, self.miles_sd) <= 0:
            raise ValueError("standard deviations must be positive")
        if not self.energy_per_mile > 0:
            raise ValueError("energy_per_mile must be positive")
        if self.speed_sd_frac < 0:
            raise ValueError("speed_sd_frac must be >= 0")


@dataclass(frozen=True)
class ChargingScenario:
    vehicle_class: VehicleClass
    fleet_count: int
    charge_power_kw: float
    battery_kwh: float
    anxiety_threshold: float = 0.30
    behavior: BehaviorDistributions = field(default_factory=BehaviorDistributions)
    scenario_index: int | str = "custom"

    def __post_init__(self):
        if self.fleet_count < 0 or int(self.fleet_count) != self.fleet_count:
            raise ValueError("fleet_count must be a nonnegative integer")
        if not (self.charge_power_kw > 0 and self.battery_kwh > 0):
            raise ValueError("charge power and battery capacity must be positive")
        if not 0 < self.anxiety_threshold < 1:
            raise ValueError("anxiety_threshold must lie in (0, 1)")

    @property
    def is_fast(self) -> bool:
        return self.charge_power_kw >= FAST_KW

    def with_fleet(self, n: int) -> "ChargingScenario":
        return replace(self, fleet_count=n)


def catalog(index: int, behavior: BehaviorDistributions | None = None) -> ChargingScenario:
    """One of the ten standard scenarios (1-8 commuters, 9-10 ride service)."""
    if not 1 <= index <= 10:
        raise ValueError(f"scenario index must be 1..10, got {index}")
    behavior = behavior or BehaviorDistributions()
    if index >= 9:
        return ChargingScenario(VehicleClass.RIDE_SERVICE, 500 if index == 9 else 1000,
                                FAST_KW, LONG_RANGE_KWH, behavior=behavior, scenario_index=index)
    j = index - 1
    fleet = 500 if j < 4 else 1000
    power = FAST_KW if (j % 4) >= 2 else SLOW_KW
    battery = LONG_RANGE_KWH if j % 2 else SHORT_RANGE_KWH
    return ChargingScenario(VehicleClass.COMMUTER, fleet, power, battery,
                            behavior=behavior, scenario_index=index)


@dataclass(frozen=True)
class ChargingSession:
    start: float        # h from horizon start
    duration: float     # h
    power_kw: float
    vehicle_id: int

    @property
    def end(self) -> float:
        return self.start + self.duration


def charge_duration(battery_kwh: float, soc: float, power_kw: float) -> float:
    """Hours to charge from ``soc`` to full at constant power."""
    for name, v in (("battery_kwh", battery_kwh), ("soc", soc), ("power_kw", power_kw)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite")
    if not 0 <= soc <= 1:
        raise ValueError("soc must lie in [0, 1]")
    if battery_kwh <= 0 or power_kw <= 0:
        raise ValueError("battery and power must be positive")
    return battery_kwh * (1.0 - soc) / power_kw


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``; counter-based, order free."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


# ---------------------------------------------------------------- draw helpers

def draw_commuter_days(b: BehaviorDistributions, rng: np.random.Generator, size: int):
    """Departure, arrival (h) and miles for ``size`` days, sanitised.

    Negative samples clamp to 0; an arrival before departure is redrawn up
    to ten times and then swapped with the departure.
    """
    depart = np.maximum(rng.normal(b.depart_mean, b.depart_sd, size), 0.0)
    arrive = np.maximum(rng.normal(b.arrive_mean, b.arrive_sd, size), 0.0)
    miles = np.maximum(rng.normal(b.miles_mean, b.miles_sd, size), 0.0)
    for _ in range(MAX_REDRAWS):
        bad = arrive < depart
        nbad = int(bad.sum())
        if nbad == 0:
            break
        arrive[bad] = np.maximum(rng.normal(b.arrive_mean, b.arrive_sd, nbad), 0.0)
    bad = arrive < depart
    if bad.any():
        depart[bad], arrive[bad] = arrive[bad], depart[bad].copy()
    return depart, arrive, miles


def draw_speed_factor(b: BehaviorDistributions, rng: np.random.Generator, size: int):
    return np.maximum(rng.normal(1.0, b.speed_sd_frac, size), 0.0)


# ------------------------------------------------------------ per-day kernels

def slow_day(scn: ChargingScenario, arrive, miles):
    """Session start (h into day) and duration for home chargers; 0 duration = none."""
    energy = np.minimum(np.asarray(miles) * scn.behavior.energy_per_mile, scn.battery_kwh)
    return np.asarray(arrive, dtype=float), energy / scn.charge_power_kw


def fast_day(scn: ChargingScenario, soc, depart, arrive, miles, coin):
    """Deplete SoC by the day's driving; recharge en route when below threshold.

    Returns (charges mask, start h into day, duration, end-of-day SoC).
    """
    used = np.asarray(miles) * scn.behavior.energy_per_mile / scn.battery_kwh
    after = np.maximum(np.asarray(soc, dtype=float) - used, 0.0)
    charges = after < scn.anxiety_threshold
    start = np.where(np.asarray(coin) < 0.5, depart, arrive)
    duration = np.where(charges, scn.battery_kwh * (1.0 - after) / scn.charge_power_kw, 0.0)
    return charges, start, duration, np.where(charges, 1.0, after)


def ride_day(scn: ChargingScenario, soc, speed_factor):
    """Drive the service window period by period, recharging at the threshold.

    Returns (vehicle index, start h into day, duration) arrays and new SoC.
    """
    b = scn.behavior
    soc = np.array(soc, dtype=float, copy=True)
    mult = np.asarray(speed_factor, dtype=float)
    tau = scn.anxiety_threshold
    dur = scn.battery_kwh * (1.0 - tau) / scn.charge_power_kw
    t = np.full(soc.shape, b.service_window[0])
    vid, st = [], []
    for a, e, mph in b.avg_speed_by_period:
        t = np.maximum(t, a)
        rate = mph * mult * b.energy_per_mile / scn.battery_kwh     # SoC per hour
        while True:
            active = (t < e) & (rate > 0)
            if not active.any():
                break
            with np.errstate(divide="ignore", invalid="ignore"):
                t_cross = t + np.maximum(soc - tau, 0.0) / rate
            cross = active & (t_cross < e)
            idx = np.flatnonzero(cross)
            if idx.size:
                vid.append(idx)
                st.append(t_cross[idx])
                soc[idx] = 1.0
                t[idx] = t_cross[idx] + dur
            rest = active & ~cross
            soc[rest] -= rate[rest] * (e - t[rest])
            t[rest] = e
    if vid:
        vid = np.concatenate(vid)
        st = np.concatenate(st)
    else:
        vid = np.zeros(0, dtype=np.int64)
        st = np.zeros(0)
    return vid, st, np.full(st.shape, dur), soc


# ------------------------------------------------------------ day-level API

def _sessions(day_index, starts, durations, power, vehicle_id=0):
    return [ChargingSession(day_index * 24.0 + float(s), float(d), power, vehicle_id)
            for s, d in zip(np.atleast_1d(starts), np.atleast_1d(durations)) if d > 0]


def sample_commuter_slow_day(scn: ChargingScenario, day_index: int, rng: np.random.Generator,
                             vehicle_id: int = 0) -> list[ChargingSession]:
    _, arrive, miles = draw_commuter_days(scn.behavior, rng, 1)
    start, dur = slow_day(scn, arrive, miles)
    return _sessions(day_index, start, dur, scn.charge_power_kw, vehicle_id)


def sample_commuter_fast(scn: ChargingScenario, soc_carryover: float, day_index: int,
                         rng: np.random.Generator, vehicle_id: int = 0):
    if not 0 <= soc_carryover <= 1:
        raise ValueError("soc_carryover must lie in [0, 1]")
    depart, arrive, miles = draw_commuter_days(scn.behavior, rng, 1)
    coin = rng.random(1)
    charges, start, dur, new = fast_day(scn, [soc_carryover], depart, arrive, miles, coin)
    return _sessions(day_index, start, dur, scn.charge_power_kw, vehicle_id), float(new[0])


def sample_ride_service_day(scn: ChargingScenario, soc_carryover: float, day_index: int,
                            rng: np.random.Generator, vehicle_id: int = 0):
    factor = draw_speed_factor(scn.behavior, rng, 1)
    _, st, dur, soc = ride_day(scn, [soc_carryover], factor)
    return _sessions(day_index, st, dur, scn.charge_power_kw, vehicle_id), float(soc[0])


# ------------------------------------------------------------ fleet level

@dataclass
class SessionTable:
    """Columnar session list sorted by (vehicle_id, start)."""
    vehicle_id: np.ndarray
    start: np.ndarray
    duration: np.ndarray
    power_kw: np.ndarray

    def __len__(self):
        return self.start.size

    @property
    def energy_kwh(self) -> float:
        return float(np.sum(self.duration * self.power_kw))

    def sessions(self) -> list[ChargingSession]:
        return [ChargingSession(float(s), float(d), float(p), int(v)) for v, s, d, p in
                zip(self.vehicle_id, self.start, self.duration, self.power_kw)]


def _empty_table() -> SessionTable:
    z = np.zeros(0)
    return SessionTable(np.zeros(0, dtype=np.int64), z, z.copy(), z.copy())


def _push_apart(idx, start, dur, last_end):
    """Delay sessions so no vehicle's sessions overlap; updates ``last_end``."""
    if idx.size == 0:
        return start
    order = np.lexsort((start, idx))
    idx, start, dur = idx[order], start[order].copy(), dur[order]
    first = np.r_[True, idx[1:] != idx[:-1]]
    start[first] = np.maximum(start[first], last_end[idx[first]])
    while True:
        prev_end = np.r_[-np.inf, (start + dur)[:-1]]
        clash = ~first & (start < prev_end)
        if not clash.any():
            break
        start[clash] = prev_end[clash]
    last = np.r_[idx[1:] != idx[:-1], True]
    last_end[idx[last]] = start[last] + dur[last]
    out = np.empty_like(start)
    out[order] = start
    return out


def generate_fleet_sessions(scn: ChargingScenario, horizon_days: int, seed: int,
                            key: tuple[int, ...] = ()) -> SessionTable:
    """Sample every vehicle over the horizon.

    Vehicle ``v`` draws from ``stream(seed, *key, v)``: first its initial SoC
    (uniform between threshold and full), then its per-day variables.
    """
    if horizon_days < 1:
        raise ValueError("horizon_days must be >= 1")
    n = int(scn.fleet_count)
    if n == 0:
        return _empty_table()
    b = scn.behavior
    days = int(horizon_days)
    ride = scn.vehicle_class is VehicleClass.RIDE_SERVICE
    soc0 = np.empty(n)
    if ride:
        factor = np.empty((n, days))
    else:
        dep = np.empty((n, days))
        arr = np.empty((n, days))
        mi = np.empty((n, days))
        coin = np.empty((n, days))
    for v in range(n):
        g = stream(seed, *key, v)
        soc0[v] = g.uniform(scn.anxiety_threshold, 1.0)
        if ride:
            factor[v] = draw_speed_factor(b, g, days)
        else:
            dep[v], arr[v], mi[v] = draw_commuter_days(b, g, days)
            coin[v] = g.random(days)
    if ride:
        factor = np.ascontiguousarray(factor.T)
    else:
        dep, arr, mi, coin = (np.ascontiguousarray(x.T) for x in (dep, arr, mi, coin))

    veh, start, dur = [], [], []
    last_end = np.full(n, -np.inf)
    soc = soc0
    all_v = np.arange(n)
    for d in range(days):
        off = 24.0 * d
        if ride:
            idx, st, du, soc = ride_day(scn, soc, factor[d])
        elif scn.is_fast:
            ch, st, du, soc = fast_day(scn, soc, dep[d], arr[d], mi[d], coin[d])
            idx, st, du = all_v[ch], st[ch], du[ch]
        else:
            st, du = slow_day(scn, arr[d], mi[d])
            keep = du > 0
            idx, st, du = all_v[keep], st[keep], du[keep]
        st = _push_apart(idx, st + off, du, last_end)
        veh.append(idx)
        start.append(st)
        dur.append(du)
    veh = np.concatenate(veh).astype(np.int64)
    start = np.concatenate(start)
    dur = np.concatenate(dur)
    order = np.lexsort((start, veh))
    return SessionTable(veh[order], start[order], dur[order], np.full(veh.size, scn.charge_power_kw))


@dataclass
class LoadProfile:
    values: np.ndarray          # kW per slot (2-D: slot x bus)
    resolution_h: float = 0.25

    @property
    def horizon_slots(self) -> int:
        return self.values.shape[0]

    @property
    def energy_kwh(self) -> float:
        return float(np.sum(self.values) * self.resolution_h)


def check_resolution(resolution_h: float) -> None:
    if not resolution_h > 0:
        raise ValueError("resolution must be positive")
    per_day = 24.0 / resolution_h
    if abs(per_day - round(per_day)) > 1e-9:
        raise ValueError(f"resolution {resolution_h} h does not divide 24 h")


def rasterize(table: SessionTable, horizon_slots: int, resolution_h: float,
              bus_of_vehicle: np.ndarray | None = None, n_bus: int | None = None) -> np.ndarray:
    """Average kW per slot, partial slots prorated by overlap.

    Time past the horizon wraps to its start (the simulated year is treated
    as periodic), so energy is conserved exactly.
    """
    shape = (horizon_slots,) if bus_of_vehicle is None else (horizon_slots, n_bus)
    if len(table) == 0:
        return np.zeros(shape)
    res = resolution_h
    s = table.start
    e = s + table.duration
    first = np.floor(s / res).astype(np.int64)
    last = np.ceil(e / res).astype(np.int64)
    span = int(np.max(last - first)) if s.size else 0
    if bus_of_vehicle is None:
        col = np.zeros(s.size, dtype=np.int64)
        width = 1
    else:
        col = np.asarray(bus_of_vehicle)[table.vehicle_id]
        width = n_bus
    acc = np.zeros(horizon_slots * width)
    for k in range(max(span, 1)):
        slot = first + k
        lo = slot * res
        overlap = np.minimum(e, lo + res) - np.maximum(s, lo)
        m = overlap > 0
        if not m.any():
            continue
        flat = (slot[m] % horizon_slots) * width + col[m]
        acc += np.bincount(flat, weights=table.power_kw[m] * overlap[m] / res, minlength=acc.size)
    return acc.reshape(shape)


def generate_fleet_profile(scn: ChargingScenario, horizon_days: int, resolution_h: float,
                           seed: int, key: tuple[int, ...] = ()) -> LoadProfile:
    check_resolution(resolution_h)
    slots = int(round(horizon_days * 24.0 / resolution_h))
    table = generate_fleet_sessions(scn, horizon_days, seed, key)
    return LoadProfile(rasterize(table, slots, resolution_h), resolution_h)
