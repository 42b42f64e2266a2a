"""Voltage-regulator tap changer state machine and operation-count aging."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class VrConfig:
    v_regulated: float = 1.0
    kappa: float = 0.0065
    deadband: tuple[float, float] | None = None   # defaults to v_regulated +/- kappa
    h_min: int = -16
    h_max: int = 16
    n_op_max: float = 1e6

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.h_min < 0 < self.h_max:
            raise ValueError("need h_min < 0 < h_max")
        if not self.n_op_max > 0:
            raise ValueError("n_op_max must be positive")
        lo, hi = self.band
        if not lo <= self.v_regulated <= hi:
            raise ValueError("deadband must contain v_regulated")

    @property
    def band(self) -> tuple[float, float]:
        if self.deadband is None:
            return (self.v_regulated - self.kappa, self.v_regulated + self.kappa)
        return tuple(self.deadband)


@dataclass
class VrState:
    h: int = 0
    op_count: int = 0
    history: list = field(default_factory=list)   # (slot, h)


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def tap_step(v_measured, config: VrConfig):
    """Signed tap correction for a measured voltage (0 inside the deadband).

    Positive means buck.  Works elementwise on arrays.
    """
    v = np.asarray(v_measured, dtype=float)
    lo, hi = config.band
    outside = (v < lo) | (v > hi)
    step = round_half_away((v - config.v_regulated) / config.kappa)
    return np.where(outside, step, 0.0).astype(np.int64)


def next_tap(h, v_measured, config: VrConfig):
    """New tap position(s) after one control decision, clamped to limits."""
    return np.clip(np.asarray(h) - tap_step(v_measured, config), config.h_min, config.h_max)


def decide_tap(state: VrState, v_measured: float, config: VrConfig, slot: int | None = None) -> VrState:
    if not v_measured > 0:
        raise ValueError("measured voltage must be positive")
    h = int(next_tap(state.h, v_measured, config))
    slot = len(state.history) if slot is None else slot
    return VrState(h, state.op_count + abs(h - state.h), state.history + [(slot, h)])


def run_series(v_series, config: VrConfig, initial_h: int = 0) -> VrState:
    """Fold the controller over an exogenous measured-voltage series."""
    v = [float(x) for x in v_series]
    if not v:
        raise ValueError("v_series must be nonempty")
    h = initial_h
    ops = 0
    hist = []
    for n, vn in enumerate(v):
        if not vn > 0:
            raise ValueError(f"nonpositive voltage at slot {n}")
        new = int(next_tap(h, vn, config))
        ops += abs(new - h)
        h = new
        hist.append((n, h))
    return VrState(h, ops, hist)


def ops_from_history(history, initial_h: int = 0) -> int:
    prev = initial_h
    total = 0
    for _, h in history:
        total += abs(h - prev)
        prev = h
    return total


def vr_lol(state_or_ops, config: VrConfig) -> float:
    ops = state_or_ops.op_count if isinstance(state_or_ops, VrState) else state_or_ops
    return ops / config.n_op_max
