"""Transformer top-oil / hot-spot thermal dynamics and insulation aging.

The top-oil temperature and the hot-spot rise over top-oil are two first-order
lags driven by the load factor K = s / s_R.  Within one slot K is held
constant, so each lag is advanced with its exact exponential solution and the
integrator is free of step-size error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HOURS_PER_YEAR = 8760.0
T_INS_HOURS = 135_000.0
T_INS_YEARS = T_INS_HOURS / HOURS_PER_YEAR
EPS_LIFETIME_YR = 0.5


@dataclass(frozen=True)
class ThermalParams:
    s_r: float = 10_000.0            # kVA
    dtheta_to_rated: float = 55.0    # K
    dtheta_h_rated: float = 25.0     # K
    tau_to: float = 3.5              # h
    tau_h: float = 0.08              # h
    loss_ratio_r: float = 53.0 / 13.2
    oil_exponent_x: float = 0.8
    winding_exponent_y: float = 1.6
    theta_ambient: float | Sequence[float] = 30.0

    def __post_init__(self):
        for name in ("s_r", "dtheta_to_rated", "dtheta_h_rated", "tau_to",
                     "tau_h", "loss_ratio_r", "oil_exponent_x", "winding_exponent_y"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if self.tau_h >= self.tau_to:
            raise ValueError("tau_h must be smaller than tau_to")

    def ambient_at(self, slot: int) -> float:
        if np.ndim(self.theta_ambient) == 0:
            return float(self.theta_ambient)
        return float(self.theta_ambient[slot])


@dataclass(frozen=True)
class AgingParams:
    alpha: float = 15000.0 / 383.0
    beta: float = 15000.0
    omega: float = 273.0
    t_ins_hours: float = T_INS_HOURS

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.t_ins_hours > 0:
            raise ValueError("t_ins_hours must be positive")

    @property
    def t_ins_years(self) -> float:
        return self.t_ins_hours / HOURS_PER_YEAR


@dataclass(frozen=True)
class ThermalState:
    theta_to: float
    dtheta_h: float

    @property
    def theta_hst(self) -> float:
        return self.theta_to + self.dtheta_h


def _targets(k: float, params: ThermalParams, ambient: float) -> tuple[float, float]:
    r = params.loss_ratio_r
    to = ambient + params.dtheta_to_rated * ((1.0 + r * k * k) / (1.0 + r)) ** params.oil_exponent_x
    h = params.dtheta_h_rated * k ** params.winding_exponent_y
    return to, h


def steady_state_temps(k: float, params: ThermalParams, ambient: float | None = None) -> ThermalState:
    """Equilibrium temperatures for a constant load factor ``k``."""
    if not k >= 0:
        raise ValueError(f"load factor must be >= 0, got {k!r}")
    if ambient is None:
        ambient = params.ambient_at(0)
    to, h = _targets(k, params, ambient)
    return ThermalState(to, h)


def step_thermal(state: ThermalState, k: float, dt_h: float, params: ThermalParams,
                 ambient: float | None = None) -> ThermalState:
    """Advance both lags by ``dt_h`` hours with ``k`` held constant."""
    if not dt_h > 0:
        raise ValueError("dt_h must be positive")
    if ambient is None:
        ambient = params.ambient_at(0)
    to_target, h_target = _targets(k, params, ambient)
    e_to = math.exp(-dt_h / params.tau_to)
    e_h = math.exp(-dt_h / params.tau_h)
    return ThermalState(
        to_target + (state.theta_to - to_target) * e_to,
        h_target + (state.dtheta_h - h_target) * e_h,
    )


@dataclass
class ThermalTrace:
    """Per-slot temperatures at the start of each slot."""
    theta_to: np.ndarray
    dtheta_h: np.ndarray
    dt_h: float
    final: ThermalState = field(repr=False, default=None)

    @property
    def theta_hst(self) -> np.ndarray:
        return self.theta_to + self.dtheta_h


def rollout(k_series: Sequence[float], dt_h: float, params: ThermalParams,
            initial: ThermalState | None = None) -> ThermalTrace:
    """Simulate the thermal model over a load-factor series.

    Without ``initial`` the transformer starts at the steady state of the
    first slot's load.
    """
    k = np.asarray(k_series, dtype=float)
    if k.ndim != 1 or k.size == 0:
        raise ValueError("k_series must be a nonempty 1-D sequence")
    if np.any(k < 0) or not np.all(np.isfinite(k)):
        raise ValueError("load factors must be finite and >= 0")
    n = k.size
    scalar_amb = np.ndim(params.theta_ambient) == 0
    amb = np.full(n, float(params.theta_ambient)) if scalar_amb else np.asarray(params.theta_ambient, float)
    if amb.size != n:
        raise ValueError(f"ambient series has {amb.size} slots, load has {n}")

    r = params.loss_ratio_r
    to_target = amb + params.dtheta_to_rated * ((1.0 + r * k * k) / (1.0 + r)) ** params.oil_exponent_x
    h_target = params.dtheta_h_rated * k ** params.winding_exponent_y
    e_to = math.exp(-dt_h / params.tau_to)
    e_h = math.exp(-dt_h / params.tau_h)

    if initial is None:
        to, h = float(to_target[0]), float(h_target[0])
    else:
        to, h = initial.theta_to, initial.dtheta_h
    out_to = np.empty(n)
    out_h = np.empty(n)
    tt = to_target.tolist()
    ht = h_target.tolist()
    for i in range(n):
        out_to[i] = to
        out_h[i] = h
        to = tt[i] + (to - tt[i]) * e_to
        h = ht[i] + (h - ht[i]) * e_h
    return ThermalTrace(out_to, out_h, dt_h, ThermalState(to, h))


def faa(theta_hst, aging: AgingParams = AgingParams()):
    """Accelerated aging factor; 1 at the reference hot-spot temperature."""
    theta = np.asarray(theta_hst, dtype=float)
    denom = theta + aging.omega
    if np.any(denom <= 0):
        raise ValueError("hot-spot temperature at or below the aging-law pole")
    out = np.exp(aging.alpha - aging.beta / denom)
    return float(out) if out.ndim == 0 else out


def accumulate_lol(theta_series, dt_h: float, aging: AgingParams = AgingParams()) -> float:
    """Fraction of normal insulation life consumed (left Riemann sum)."""
    theta = np.asarray(theta_series, dtype=float)
    if theta.size == 0:
        raise ValueError("theta_series must be nonempty")
    return float(np.sum(faa(theta, aging)) * dt_h / aging.t_ins_hours)


def yearly_lol_percent(lol_fraction: float, horizon_hours: float) -> float:
    return 100.0 * lol_fraction * HOURS_PER_YEAR / horizon_hours


def estimated_lifetime(yearly_lol_percent: float, t_ins_years: float = T_INS_YEARS) -> float:
    """Years until the insulation is used up, capped at the normal life."""
    if not yearly_lol_percent >= 0:
        raise ValueError("yearly LoL must be >= 0")
    if yearly_lol_percent == 0:
        return t_ins_years
    return min(100.0 / yearly_lol_percent, t_ins_years)


def is_eps_lifetime(lifetime_yr: float) -> bool:
    return lifetime_yr < EPS_LIFETIME_YR
