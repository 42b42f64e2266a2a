"""Monte Carlo orchestration: fleets -> time-series power flow -> asset models -> cost.

Random streams are addressed by counters rather than drawn in sequence:

* vehicle ``v`` of fleet group ``g`` in iteration ``k`` samples from
  ``stream(master_seed, k, 0, g, v)``;
* the bus allocation of that group uses ``stream(master_seed, k, 1, g)``.

Iteration ``k`` can therefore be regenerated on its own, and the batch the
iterations are simulated in has no influence on the result.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from . import charging as ch
from . import economics as econ
from . import thermal as th
from .network import BusLoads, FeederModel, TimeSeriesResult, run_timeseries
from .regulator import vr_lol

AREA_MIX = {
    "suburban": (0.6, 0.4),
    "urban": (0.7, 0.3),
    "rural": (0.8, 0.2),
}
PL_SWEEP = (0.0, 50.0, 100.0, 200.0, 300.0)


class ExpectationMode(str, Enum):
    MEAN_K_THEN_MODEL = "mean_k_then_model"
    PER_ITERATION = "per_iteration_model_then_mean"


@dataclass(frozen=True)
class McsConfig:
    iterations: int = 100
    master_seed: int = 0
    horizon_days: int = 365
    resolution_h: float = 0.25
    expectation_mode: ExpectationMode = ExpectationMode.MEAN_K_THEN_MODEL
    batch_size: int = 100
    pev_power_factor: float = 0.95

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be a nonnegative integer")
        if self.horizon_days < 1:
            raise ValueError("horizon_days must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        ch.check_resolution(self.resolution_h)

    @property
    def horizon_slots(self) -> int:
        return int(round(self.horizon_days * 24.0 / self.resolution_h))

    @property
    def horizon_hours(self) -> float:
        return self.horizon_days * 24.0


@dataclass(frozen=True)
class MixedFleetSpec:
    pl_percent: float
    slow_share: float
    fast_share: float
    base_peak_kw: float
    slow_battery_kwh: float = ch.SHORT_RANGE_KWH
    fast_battery_kwh: float = ch.SHORT_RANGE_KWH

    def __post_init__(self):
        if self.pl_percent < 0:
            raise ValueError("pl_percent must be >= 0")
        if not (0 <= self.slow_share <= 1 and 0 <= self.fast_share <= 1):
            raise ValueError("shares must lie in [0, 1]")
        if abs(self.slow_share + self.fast_share - 1.0) > 1e-9:
            raise ValueError("shares must sum to 1")
        if not self.base_peak_kw > 0:
            raise ValueError("base peak must be positive")

    @classmethod
    def for_area(cls, area: str, pl_percent: float, base_peak_kw: float) -> "MixedFleetSpec":
        slow, fast = AREA_MIX[area]
        return cls(pl_percent, slow, fast, base_peak_kw)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def build_mixed_fleet(spec: MixedFleetSpec) -> tuple[int, int]:
    """Slow and fast vehicle counts whose rated power makes up the PL."""
    pev_kw = spec.pl_percent * spec.base_peak_kw / 100.0
    slow = _round_half_up(spec.slow_share * pev_kw / ch.SLOW_KW)
    fast = _round_half_up(spec.fast_share * pev_kw / ch.FAST_KW)
    return slow, fast


def mixed_fleet(spec: MixedFleetSpec, behavior: ch.BehaviorDistributions | None = None
                ) -> list[ch.ChargingScenario]:
    behavior = behavior or ch.BehaviorDistributions()
    slow, fast = build_mixed_fleet(spec)
    tag = f"PL{spec.pl_percent:g}"
    return [
        ch.ChargingScenario(ch.VehicleClass.COMMUTER, slow, ch.SLOW_KW, spec.slow_battery_kwh,
                            behavior=behavior, scenario_index=tag),
        ch.ChargingScenario(ch.VehicleClass.COMMUTER, fast, ch.FAST_KW, spec.fast_battery_kwh,
                            behavior=behavior, scenario_index=tag),
    ]


def penetration_level(fleet: Sequence[ch.ChargingScenario], base_profile_kw) -> float:
    """Rated charging power of the fleet as a percentage of peak base load."""
    peak = float(np.max(base_profile_kw))
    if not peak > 0:
        raise ValueError("base load peak must be positive")
    rated = sum(s.fleet_count * s.charge_power_kw for s in fleet)
    return 100.0 * rated / peak


def base_bus_loads(feeder: FeederModel, p_kw, q_kvar=None, power_factor: float = 0.95,
                   resolution_h: float = 0.25) -> BusLoads:
    """Spread a substation-level base profile over load buses by their shares."""
    p = np.asarray(p_kw, dtype=float)
    q = p * math.tan(math.acos(power_factor)) if q_kvar is None else np.asarray(q_kvar, dtype=float)
    w = feeder.load_shares()
    return BusLoads(p[:, None] * w[None, :], q[:, None] * w[None, :], resolution_h)


# ---------------------------------------------------------------- iterations

def _fleet_list(fleet) -> list[ch.ChargingScenario]:
    if isinstance(fleet, ch.ChargingScenario):
        return [fleet]
    return list(fleet)


def iteration_pev(fleet, feeder: FeederModel, config: McsConfig, iteration: int) -> np.ndarray:
    """(slots, n_bus) PEV kW for one iteration with fresh bus allocation."""
    c = feeder.compiled()
    w = feeder.load_shares()
    n = len(c.order)
    out = np.zeros((config.horizon_slots, n))
    for g, scn in enumerate(_fleet_list(fleet)):
        if scn.fleet_count == 0:
            continue
        table = ch.generate_fleet_sessions(scn, config.horizon_days, config.master_seed,
                                           key=(iteration, 0, g))
        bus = ch.stream(config.master_seed, iteration, 1, g).choice(n, size=scn.fleet_count, p=w)
        out += ch.rasterize(table, config.horizon_slots, config.resolution_h, bus, n)
    return out


def _has_pev(fleet) -> bool:
    return any(s.fleet_count > 0 for s in _fleet_list(fleet))


def run_iterations(fleet, feeder: FeederModel, base: BusLoads, config: McsConfig,
                   iterations: Sequence[int], pev_totals: list | None = None) -> TimeSeriesResult:
    """Simulate the given iterations (batched) and stack their results.

    If ``pev_totals`` is a list, each iteration's feeder-total PEV kW series
    is appended to it.
    """
    parts = []
    its = list(iterations)
    for lo in range(0, len(its), config.batch_size):
        chunk = its[lo:lo + config.batch_size]
        pev = np.stack([iteration_pev(fleet, feeder, config, k) for k in chunk]).astype(np.float32)
        if pev_totals is not None:
            pev_totals.extend(pev.sum(axis=2, dtype=np.float64))
        parts.append(run_timeseries(feeder, base, pev, config.pev_power_factor, iteration_offset=chunk[0]))
    if len(parts) == 1:
        return parts[0]
    return TimeSeriesResult(
        k=np.concatenate([p.k for p in parts]),
        v_reg=np.concatenate([p.v_reg for p in parts]),
        v_min=np.concatenate([p.v_min for p in parts]),
        taps=np.concatenate([p.taps for p in parts]),
        ops=np.concatenate([p.ops for p in parts]),
        resolution_h=parts[0].resolution_h,
    )


def run_iteration(fleet, feeder: FeederModel, base: BusLoads, config: McsConfig,
                  iteration: int) -> TimeSeriesResult:
    return run_iterations(fleet, feeder, base, config, [iteration])


# ---------------------------------------------------------------- assessment

@dataclass(frozen=True)
class AssetParams:
    thermal: th.ThermalParams = field(default_factory=th.ThermalParams)
    aging: th.AgingParams = field(default_factory=th.AgingParams)
    tco: econ.TcoParams = field(default_factory=econ.TcoParams)


@dataclass
class ScenarioResult:
    label: str
    fleet: list
    pl_percent: float               # rated charger power over base peak
    pl_observed_percent: float      # peak of the mean PEV profile over base peak
    iterations: int
    mean_k: np.ndarray
    theta_to: np.ndarray
    theta_hst: np.ndarray
    lol_horizon: float              # fraction of normal life consumed over the horizon
    yearly_lol_pct: float
    lifetime_yr: float
    eps_flag: bool
    vr_ops_per_year: np.ndarray     # per regulator, mean over iterations, summed over phases
    vr_ops_iterations: np.ndarray   # (iterations, n_reg) annualised
    vr_lol_per_year: np.ndarray
    tco_conventional: econ.TcoBreakdown
    tco_reestablished: econ.TcoBreakdown
    tco_vr: list
    taps_example: np.ndarray        # (phases, slots, n_reg), iteration 0
    mean_pev_kw: np.ndarray | None = None
    k_iterations: np.ndarray | None = None
    yearly_lol_pct_iterations: np.ndarray | None = None

    @property
    def vr_ops(self) -> float:
        return float(self.vr_ops_per_year.sum())

    @property
    def vr_lol(self) -> float:
        return float(self.vr_lol_per_year.max()) if self.vr_lol_per_year.size else 0.0


def _thermal_lol(k, config: McsConfig, assets: AssetParams):
    trace = th.rollout(k, config.resolution_h, assets.thermal)
    lol = th.accumulate_lol(trace.theta_hst, config.resolution_h, assets.aging)
    return trace, lol


def run_mcs(config: McsConfig, fleet, feeder: FeederModel, base: BusLoads,
            assets: AssetParams = AssetParams(), label: str = "", keep_iterations: bool = False
            ) -> ScenarioResult:
    """Run every iteration, average, and evaluate the asset and cost models."""
    fleet = _fleet_list(fleet)
    if base.horizon_slots != config.horizon_slots:
        raise ValueError(f"base load has {base.horizon_slots} slots, horizon needs {config.horizon_slots}")
    n_iter = config.iterations if _has_pev(fleet) else 1
    totals = []
    ts = run_iterations(fleet, feeder, base, config, range(n_iter), totals)
    mean_pev = np.mean(totals, axis=0)
    mean_k = ts.k.mean(axis=0)
    year_scale = th.HOURS_PER_YEAR / config.horizon_hours

    trace, lol = _thermal_lol(mean_k, config, assets)
    per_it = None
    if config.expectation_mode is ExpectationMode.PER_ITERATION or keep_iterations:
        per_it = np.array([_thermal_lol(k, config, assets)[1] for k in ts.k])
        if config.expectation_mode is ExpectationMode.PER_ITERATION:
            lol = float(per_it.mean())
    yearly = 100.0 * lol * year_scale
    t_ins_yr = assets.aging.t_ins_years
    lifetime = th.estimated_lifetime(yearly, t_ins_yr)

    ops_it = ts.ops.sum(axis=1) * year_scale            # (iterations, n_reg)
    ops_year = ops_it.mean(axis=0)
    c = feeder.compiled()
    vr_lol_year = np.array([vr_lol(o, cfg) for o, cfg in zip(ops_year, c.reg_cfg)])

    tco = assets.tco
    s_kva = mean_k * feeder.s_r_kva
    conv = econ.tco_conventional(tco, float(s_kva.mean()), float(s_kva.max()))
    reest = econ.tco_transformer_reestablished(tco, yearly / 100.0, mean_k, 0.0, t_ins_yr,
                                               initial_purchase=True)
    vr_costs = []
    for r, (l_year, cfg) in enumerate(zip(vr_lol_year, c.reg_cfg)):
        l_window = l_year * t_ins_yr
        vr_costs.append({"regulator": c.branch_of[c.reg_pos[r]], "lol": l_window,
                         "dollars": econ.tco_vr(l_window, tco.vr_c_o)})

    peak = float(np.max(base.p_kw.sum(axis=1)))
    return ScenarioResult(
        label=label or _default_label(fleet),
        fleet=[_fleet_dict(s) for s in fleet],
        pl_percent=penetration_level(fleet, peak),
        pl_observed_percent=100.0 * float(mean_pev.max()) / peak,
        iterations=n_iter,
        mean_k=mean_k,
        theta_to=trace.theta_to,
        theta_hst=trace.theta_hst,
        lol_horizon=lol,
        yearly_lol_pct=yearly,
        lifetime_yr=lifetime,
        eps_flag=th.is_eps_lifetime(lifetime),
        vr_ops_per_year=ops_year,
        vr_ops_iterations=ops_it,
        vr_lol_per_year=vr_lol_year,
        tco_conventional=conv,
        tco_reestablished=reest,
        tco_vr=vr_costs,
        taps_example=ts.taps[0],
        mean_pev_kw=mean_pev,
        k_iterations=ts.k if keep_iterations else None,
        yearly_lol_pct_iterations=None if per_it is None else 100.0 * per_it * year_scale,
    )


def _default_label(fleet) -> str:
    if not _has_pev(fleet):
        return "benchmark"
    idx = {str(s.scenario_index) for s in fleet}
    return "scenario_" + "+".join(sorted(idx))


def _fleet_dict(s: ch.ChargingScenario) -> dict:
    return {"vehicle_class": s.vehicle_class.value, "fleet_count": s.fleet_count,
            "charge_power_kw": s.charge_power_kw, "battery_kwh": s.battery_kwh,
            "anxiety_threshold": s.anxiety_threshold, "scenario_index": s.scenario_index}


@dataclass
class AssessmentReport:
    benchmark: ScenarioResult
    scenarios: list[ScenarioResult]
    seed: int
    config_hash: str
    provenance: dict = field(default_factory=dict)

    def all_results(self) -> list[ScenarioResult]:
        return [self.benchmark] + self.scenarios

    def delta(self, res: ScenarioResult) -> dict:
        b = self.benchmark
        return {
            "yearly_lol_pct": res.yearly_lol_pct - b.yearly_lol_pct,
            "vr_ops": res.vr_ops - b.vr_ops,
            "tco_conventional": res.tco_conventional.total - b.tco_conventional.total,
            "tco_reestablished": res.tco_reestablished.total - b.tco_reestablished.total,
        }


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def assess(config: McsConfig, fleets: dict, feeder: FeederModel, base: BusLoads,
           assets: AssetParams = AssetParams(), config_doc: dict | None = None) -> AssessmentReport:
    """Benchmark plus every labelled fleet, all on the same seed."""
    bench = run_mcs(config, [], feeder, base, assets, label="benchmark")
    results = [run_mcs(config, fl, feeder, base, assets, label=lab) for lab, fl in fleets.items()]
    doc = config_doc if config_doc is not None else {"mcs": asdict(config)}
    return AssessmentReport(bench, results, config.master_seed, config_hash(doc))
