import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pevgrid import fixtures as fx
from pevgrid import network as nw
from pevgrid.regulator import VrConfig
from oracles import nodal_solve, two_bus_fixed_point


def _feeder(n_bus, parents, zs, shares, regs=()):
    buses = [nw.Bus("0")] + [nw.Bus(str(i), s) for i, s in zip(range(1, n_bus), shares)]
    branches = [nw.Branch(f"b{i}", str(p), str(i), z.real, z.imag) for i, (p, z) in enumerate(zip(parents, zs), 1)]
    sites = {f"b{i}": VrConfig() for i in regs}
    return nw.FeederModel(buses, branches, "0", s_r_kva=1000, s_base_kva=1000, regulator_sites=sites)


# ---------------------------------------------------------------- topology

def test_two_bus_ok():
    fx.two_bus_feeder().compiled()


def test_cycle_rejected():
    buses = [nw.Bus(x) for x in "abc"]
    br = [nw.Branch("1", "a", "b", .01, .01), nw.Branch("2", "b", "c", .01, .01), nw.Branch("3", "c", "a", .01, .01)]
    with pytest.raises(nw.FeederError, match="cycle"):
        nw.FeederModel(buses, br, "a").compiled()


def test_undeclared_bus_rejected():
    with pytest.raises(nw.FeederError, match="disconnected"):
        nw.FeederModel([nw.Bus("a")], [nw.Branch("1", "a", "zz", .01, .01)], "a").compiled()


def test_duplicate_bus_rejected():
    with pytest.raises(nw.FeederError, match="duplicate"):
        nw.FeederModel([nw.Bus("a"), nw.Bus("a")], [], "a").compiled()


def test_phase_shares_validated():
    with pytest.raises(nw.FeederError, match="phase_shares"):
        fx.twelve_bus_feeder(phase_shares=(0.5, 0.5, 0.5)).compiled()
    fx.twelve_bus_feeder(phase_shares=(1.1, 1.0, 0.9)).compiled()


# ---------------------------------------------------------------- snapshots

def test_zero_load():
    r = nw.solve_snapshot(fx.twelve_bus_feeder(), np.zeros(12))
    assert np.allclose(r.v_pu, 1.0) and r.load_factor_k == 0.0


def test_two_bus_documented_value():
    r = nw.solve_snapshot(fx.two_bus_feeder(), {"2": 500 + 200j})
    oracle = two_bus_fixed_point(1.0, 0.01 + 0.02j, 0.5 + 0.2j)
    assert r.v_pu[1] == pytest.approx(abs(oracle), abs=1e-8)
    assert r.v_pu[1] == pytest.approx(0.99089, abs=1e-5)


def test_two_bus_with_regulator_tap():
    f = fx.two_bus_feeder(regulator=VrConfig())
    r = nw.solve_snapshot(f, {"2": 500 + 200j}, taps={"b": 4})
    oracle = two_bus_fixed_point(1.0, 0.01 + 0.02j, 0.5 + 0.2j, ratio=1.026)
    assert r.v_pu[1] == pytest.approx(abs(oracle), abs=1e-8)


@st.composite
def small_feeders(draw):
    n = draw(st.integers(2, 4))
    parents = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    zs = [complex(draw(st.floats(0.001, 0.03)), draw(st.floats(0.001, 0.05))) for _ in parents]
    loads = [complex(draw(st.floats(0, 0.6)), draw(st.floats(0, 0.3))) for _ in parents]
    regs = draw(st.lists(st.integers(1, n - 1), unique=True, max_size=2))
    taps = {f"b{i}": draw(st.integers(-16, 16)) for i in regs}
    return n, parents, zs, loads, regs, taps


@given(small_feeders())
def test_matches_nodal_oracle(case):
    n, parents, zs, loads, regs, taps = case
    f = _feeder(n, parents, zs, [1.0] * (n - 1), regs)
    s_kva = {str(i): 1000 * s for i, s in enumerate(loads, 1)}
    r = nw.solve_snapshot(f, s_kva, taps)
    ratios = {i - 1: 1 + taps[f"b{i}"] * 0.0065 for i in regs}
    ref = nodal_solve([str(i) for i in range(n)], [(str(p), str(i), z) for i, (p, z) in enumerate(zip(parents, zs), 1)],
                      "0", {str(i): s for i, s in enumerate(loads, 1)}, ratios)
    for b, vm in zip(r.bus_order, r.v_pu):
        assert vm == pytest.approx(abs(ref[b]), abs=1e-8)


def _balance_residual(c, s_pu, ratio, v, j):
    line = nw.line_currents(c, ratio, j)
    losses = np.sum(np.abs(line[:, 1:]) ** 2 * c.z[None, 1:], axis=1)
    s_head = v[:, 0] * np.conj(line[:, 0])
    return np.abs(s_head - s_pu.sum(axis=1) - losses)


def test_power_balance_randomized_batch():
    rng = np.random.default_rng(5)
    f = fx.twelve_bus_feeder()
    c = f.compiled()
    b = 10_000
    s = (rng.uniform(0, 0.25, (b, 12)) + 1j * rng.uniform(0, 0.1, (b, 12))) * (np.arange(12) > 0)
    taps = rng.integers(-16, 17, (b, 2))
    ratio = nw.ratio_matrix(c, taps)
    v, j, cnt = nw.sweep_batch(c, s, ratio, 1.0)
    assert np.all(cnt > 0)
    assert _balance_residual(c, s, ratio, v, j).max() < 1e-8


def test_batch_rows_are_independent():
    rng = np.random.default_rng(1)
    c = fx.twelve_bus_feeder().compiled()
    s = rng.uniform(0, 0.2, (6, 12)) * (1 + 0.3j)
    ratio = nw.ratio_matrix(c, rng.integers(-5, 6, (6, 2)))
    v_all, _, _ = nw.sweep_batch(c, s, ratio, 1.0)
    for k in range(6):
        v_one, _, _ = nw.sweep_batch(c, s[k:k + 1], ratio[k:k + 1], 1.0)
        assert np.array_equal(v_one[0], v_all[k])


def test_nonconvergence_raises():
    f = fx.two_bus_feeder(z=(0.5, 1.0))
    with pytest.raises(nw.PowerFlowError):
        nw.solve_snapshot(f, {"2": 5000 + 2000j})


# ---------------------------------------------------------------- time series

def _base(f, slots, level=6000.0, seed=0):
    rng = np.random.default_rng(seed)
    p = level * (1 + 0.2 * rng.standard_normal(slots).cumsum() / np.sqrt(slots))
    w = f.load_shares()
    return nw.BusLoads(p[:, None] * w, 0.33 * p[:, None] * w, 0.25)


def test_zero_pev_equals_benchmark():
    f = fx.twelve_bus_feeder()
    base = _base(f, 96)
    a = nw.run_timeseries(f, base)
    b = nw.run_timeseries(f, base, np.zeros((96, 12)))
    assert np.array_equal(a.k, b.k) and np.array_equal(a.taps, b.taps)


def test_constant_load_taps_settle():
    f = fx.twelve_bus_feeder()
    w = f.load_shares()
    p = np.full(200, 9000.0)
    r = nw.run_timeseries(f, nw.BusLoads(p[:, None] * w, 0.3 * p[:, None] * w))
    taps = r.taps[0, 0]
    assert np.all(taps[-150:] == taps[-1])
    lo, hi = VrConfig().band
    assert np.all((r.v_reg[0, 0, -1] >= lo) & (r.v_reg[0, 0, -1] <= hi))


def test_batch_matches_single_runs():
    f = fx.twelve_bus_feeder()
    base = _base(f, 96)
    rng = np.random.default_rng(3)
    pev = rng.uniform(0, 300, (3, 96, 12))
    batch = nw.run_timeseries(f, base, pev)
    for k in range(3):
        one = nw.run_timeseries(f, base, pev[k])
        assert np.array_equal(one.k[0], batch.k[k])
        assert np.array_equal(one.ops[0], batch.ops[k])


def test_pev_raises_load_factor():
    f = fx.twelve_bus_feeder()
    base = _base(f, 48)
    r0 = nw.run_timeseries(f, base)
    r1 = nw.run_timeseries(f, base, np.full((48, 12), 50.0))
    assert np.all(r1.k > r0.k)


def test_timeseries_nonconvergence_reports_slot():
    f = fx.two_bus_feeder(z=(0.5, 1.0))
    p = np.array([10.0, 10.0, 5000.0])
    base = nw.BusLoads(np.c_[np.zeros(3), p], np.c_[np.zeros(3), 0.4 * p])
    with pytest.raises(nw.PowerFlowError) as ei:
        nw.run_timeseries(f, base)
    assert ei.value.slot == 2 and ei.value.iteration == 0
