"""Total cost of ownership for substation transformers and voltage regulators.

Two evaluations are provided.  The conventional one prices load losses from
the annual average-to-peak ratio; the re-established one charges capital in
proportion to insulation life actually consumed and prices load losses from
the time-varying expected loading, discounted over an arbitrary window.

Units follow the vendor parameter table: DC in $/kW-yr, EC in $/kWh, so
``N * PEC`` is the present value of one kW running for the whole window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .thermal import T_INS_YEARS


@dataclass(frozen=True)
class TcoParams:
    s_r: float = 10_000.0        # kVA
    c_o: float = 70_000.0        # $
    cl: float = 13.2             # kW
    ll: float = 53.0             # kW
    dc: float = 120.0            # $/kW-yr
    rf: float = 0.81
    ec: float = 0.05             # $/kWh
    gamma: float = 0.2
    i: float = 0.05
    n_hours: float = 8760.0
    t_ins_years: float = T_INS_YEARS
    vr_c_o: float = 60_000.0     # $ per regulator

    def __post_init__(self):
        for name in ("c_o", "cl", "ll", "dc", "ec", "vr_c_o"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 < self.rf <= 1:
            raise ValueError("rf must lie in (0, 1]")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if not self.i > 0:
            raise ValueError("interest rate must be positive")
        if not self.s_r > 0:
            raise ValueError("s_r must be positive")


def pec(ec: float, i: float, t_years: float) -> float:
    """Present value of energy cost over ``t_years`` ($/kWh)."""
    g = (1.0 + i) ** t_years
    return ec * (g - 1.0) / (i * g)


def pec_window(ec: float, i: float, t1_years: float, t2_years: float) -> float:
    """Present value of energy cost incurred between ``t1`` and ``t2``."""
    if t1_years < 0 or t2_years < t1_years:
        raise ValueError("window must satisfy 0 <= t1 <= t2")
    return (ec / i) * ((1.0 + i) ** (-t1_years) - (1.0 + i) ** (-t2_years))


def lof_conventional(s_avg: float, s_hat: float, gamma: float) -> float:
    if not (s_hat > 0 and 0 < s_avg <= s_hat):
        raise ValueError("need 0 < s_avg <= s_hat")
    u = s_avg / s_hat
    return gamma * u + (1.0 - gamma) * u * u


def lof_timeseries(mean_k_series, s_hat_pu: float, gamma: float) -> np.ndarray:
    """Per-slot loss factor from the expected load factor series.

    ``s_hat_pu`` is the peak of the same series, both normalised by s_R.
    """
    k = np.asarray(mean_k_series, dtype=float)
    if not s_hat_pu > 0:
        raise ValueError("peak must be positive")
    if np.any(k > s_hat_pu * (1 + 1e-12)):
        raise ValueError("series exceeds the stated peak")
    u = k / s_hat_pu
    return gamma * u + (1.0 - gamma) * u * u


@dataclass
class TcoBreakdown:
    component: str
    t1: float
    t2: float
    capital: float
    core_loss: float            # CL * A
    load_loss: float            # LL * B
    a: float
    b: float
    lof: float
    p_hat: float
    extra: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.capital + self.core_loss + self.load_loss

    def rows(self, scenario: str = "") -> list[tuple]:
        return [
            (scenario, self.component, term, self.t1, self.t2, dollars)
            for term, dollars in (("capital", self.capital), ("core_loss", self.core_loss),
                                  ("load_loss", self.load_loss), ("total", self.total))
        ]


def _ab(params: TcoParams, pec_value: float, lof: float, p_hat: float) -> tuple[float, float]:
    energy = params.n_hours * pec_value
    a = params.dc + energy
    b = (params.rf * params.dc + lof * energy) * p_hat ** 2
    return a, b


def tco_conventional(params: TcoParams, s_avg: float, s_hat: float,
                     t_years: float | None = None) -> TcoBreakdown:
    """Conventional transformer TCO from annual average and peak loading (kVA)."""
    t = params.t_ins_years if t_years is None else t_years
    p = pec(params.ec, params.i, t)
    lof = lof_conventional(s_avg, s_hat, params.gamma)
    p_hat = s_hat / params.s_r
    a, b = _ab(params, p, lof, p_hat)
    return TcoBreakdown("transformer_conventional", 0.0, t, params.c_o,
                        params.cl * a, params.ll * b, a, b, lof, p_hat)


def replacement_times(yearly_lol_fraction: float, t1: float, t2: float) -> list[float]:
    """Instants in (t1, t2] at which cumulative LoL (from t1) reaches 1, 2, ..."""
    if yearly_lol_fraction <= 0:
        return []
    life = 1.0 / yearly_lol_fraction
    n = math.floor((t2 - t1) * yearly_lol_fraction + 1e-12)
    return [t1 + j * life for j in range(1, n + 1)]


def tco_transformer_reestablished(params: TcoParams, yearly_lol_fraction: float,
                                  mean_k_series, t1: float, t2: float,
                                  initial_purchase: bool = False) -> TcoBreakdown:
    """Transformer TCO over ``[t1, t2]`` driven by simulated aging and loading.

    ``yearly_lol_fraction`` is the insulation life consumed per simulated
    year; it is extrapolated uniformly over the window.  Each time cumulative
    LoL crosses a whole unit a like-for-like replacement is bought.

    With ``initial_purchase`` the window opens with a new unit, so capital is
    never below one purchase price (a unit that outlives the window is still
    paid for).
    """
    if yearly_lol_fraction < 0:
        raise ValueError("LoL must be >= 0")
    if t1 < 0 or t2 <= t1:
        raise ValueError("window must satisfy 0 <= t1 < t2")
    k = np.asarray(mean_k_series, dtype=float)
    l_x = yearly_lol_fraction * (t2 - t1)
    reps = replacement_times(yearly_lol_fraction, t1, t2)
    capital_units = max(l_x, 1.0) if initial_purchase else l_x
    capital = capital_units * params.c_o

    p = pec_window(params.ec, params.i, t1, t2)
    s_hat_pu = float(k.max())
    if s_hat_pu > 0:
        lof = float(np.mean(lof_timeseries(k, s_hat_pu, params.gamma)))
    else:
        lof = 0.0
    a, b = _ab(params, p, lof, s_hat_pu)
    return TcoBreakdown("transformer_reestablished", t1, t2, capital,
                        params.cl * a, params.ll * b, a, b, lof, s_hat_pu,
                        extra={"l_x": l_x, "replacements": len(reps),
                               "replacement_times": reps})


def tco_vr(lol: float, capital_cost: float) -> float:
    """Regulator TCO: operation budget consumed times capital cost."""
    return lol * capital_cost
