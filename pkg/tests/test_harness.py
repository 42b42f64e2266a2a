import numpy as np
import pytest

from pevgrid import charging as ch
from pevgrid import fixtures as fx
from pevgrid import harness as h

DAYS = 4


@pytest.fixture(scope="module")
def setup():
    f = fx.twelve_bus_feeder()
    p = fx.synthetic_base_load(DAYS)
    return f, h.base_bus_loads(f, p), p


def cfg(**kw):
    base = dict(iterations=3, master_seed=5, horizon_days=DAYS, batch_size=3)
    base.update(kw)
    return h.McsConfig(**base)


def test_build_mixed_fleet_example():
    assert h.build_mixed_fleet(h.MixedFleetSpec.for_area("urban", 100, 1000.0)) == (36, 3)
    assert h.build_mixed_fleet(h.MixedFleetSpec.for_area("rural", 0, 1000.0)) == (0, 0)


def test_penetration_level():
    assert h.penetration_level([], [5.0, 10.0]) == 0.0
    assert h.penetration_level([ch.catalog(1)], [100.0, 9600.0]) == pytest.approx(100.0)
    with pytest.raises(ValueError):
        h.penetration_level([ch.catalog(1)], [0.0])


def test_mixed_fleet_roundtrip_pl():
    spec = h.MixedFleetSpec.for_area("suburban", 200, 11_500.0)
    assert h.penetration_level(h.mixed_fleet(spec), [11_500.0]) == pytest.approx(200, rel=0.02)


def test_spec_validation():
    with pytest.raises(ValueError):
        h.MixedFleetSpec(50, 0.5, 0.6, 1000)
    with pytest.raises(ValueError):
        h.McsConfig(iterations=0)


def test_zero_fleet_is_benchmark(setup):
    f, base, _ = setup
    a = h.run_mcs(cfg(), [], f, base)
    b = h.run_mcs(cfg(), [ch.catalog(1).with_fleet(0)], f, base)
    assert a.iterations == 1
    assert np.array_equal(a.mean_k, b.mean_k)
    assert a.lifetime_yr == pytest.approx(15.41, abs=0.01) and not a.eps_flag


def test_benchmark_independent_of_seed(setup):
    f, base, _ = setup
    a = h.run_mcs(cfg(master_seed=1), [], f, base)
    b = h.run_mcs(cfg(master_seed=2), [], f, base)
    assert np.array_equal(a.mean_k, b.mean_k) and a.vr_ops == b.vr_ops


def test_iteration_determinism(setup):
    f, base, _ = setup
    c = cfg()
    one = h.run_iteration([ch.catalog(1)], f, base, c, 1)
    again = h.run_iteration([ch.catalog(1)], f, base, c, 1)
    other = h.run_iteration([ch.catalog(1)], f, base, c, 2)
    assert np.array_equal(one.k, again.k)
    assert not np.array_equal(one.k, other.k)


def test_batch_size_does_not_change_results(setup):
    f, base, _ = setup
    a = h.run_mcs(cfg(iterations=4, batch_size=4), [ch.catalog(3)], f, base, keep_iterations=True)
    b = h.run_mcs(cfg(iterations=4, batch_size=3), [ch.catalog(3)], f, base, keep_iterations=True)
    assert np.array_equal(a.k_iterations, b.k_iterations)
    assert np.array_equal(a.vr_ops_iterations, b.vr_ops_iterations)


def test_single_iteration_equals_pipeline(setup):
    f, base, _ = setup
    c = cfg(iterations=1)
    r = h.run_mcs(c, [ch.catalog(1)], f, base)
    ts = h.run_iteration([ch.catalog(1)], f, base, c, 0)
    assert np.array_equal(r.mean_k, ts.k[0])


def test_slow_fleet_lifts_evening_load_every_day(setup):
    f, base, _ = setup
    bench = h.run_mcs(cfg(), [], f, base)
    slow = h.run_mcs(cfg(), [ch.catalog(1)], f, base)
    per_day = 96
    for d in range(DAYS):
        evening = slice(d * per_day + 17 * 4, d * per_day + 21 * 4)
        assert slow.mean_k[evening].mean() > bench.mean_k[evening].mean() + 0.02


def test_mean_k_variance_shrinks(setup):
    f, base, _ = setup
    r = h.run_mcs(cfg(iterations=100, batch_size=50, horizon_days=2), [ch.catalog(3)], f,
                  h.base_bus_loads(f, fx.synthetic_base_load(2)), keep_iterations=True)
    k = r.k_iterations
    per_iter = k.var(axis=0, ddof=1).mean()
    groups = k.reshape(10, 10, -1).mean(axis=1)
    of_means = groups.var(axis=0, ddof=1).mean()
    assert 0.5 < of_means / (per_iter / 10) < 2.0


def test_report_consistency(setup):
    f, base, _ = setup
    rep = h.assess(cfg(), {"s5": [ch.catalog(5)]}, f, base)
    for r in rep.all_results():
        from pevgrid.thermal import estimated_lifetime
        assert r.lifetime_yr == estimated_lifetime(r.yearly_lol_pct)
        bd = r.tco_reestablished
        assert bd.total == bd.capital + bd.core_loss + bd.load_loss
    assert rep.delta(rep.scenarios[0])["yearly_lol_pct"] > 0
    assert len(rep.config_hash) == 64


def test_per_iteration_mode(setup):
    f, base, _ = setup
    a = h.run_mcs(cfg(), [ch.catalog(5)], f, base)
    b = h.run_mcs(cfg(expectation_mode=h.ExpectationMode.PER_ITERATION), [ch.catalog(5)], f, base)
    assert np.array_equal(a.mean_k, b.mean_k)
    assert b.yearly_lol_pct == pytest.approx(b.yearly_lol_pct_iterations.mean())
    assert b.yearly_lol_pct != a.yearly_lol_pct


def test_horizon_mismatch(setup):
    f, base, _ = setup
    with pytest.raises(ValueError):
        h.run_mcs(cfg(horizon_days=5), [], f, base)
