import json
import logging

import numpy as np
import pytest
import yaml

from pevgrid import fixtures as fx
from pevgrid.cli import main
from pevgrid.ingest import InputError, load_base_csv, load_config, load_feeder, load_params


def write_base(path, n, q=True, p=5000.0, start="2019-01-01T00:00:00"):
    fx.write_base_load_csv(np.full(n, p), path, 0.25, start, 0.95 if q else None)


@pytest.fixture
def files(tmp_path):
    fx.write_feeder_csv(fx.twelve_bus_feeder(), tmp_path / "feeder.csv")
    write_base(tmp_path / "base.csv", 96)
    cfg = {"seed": 3, "iterations": 2, "horizon_days": 1, "feeder": "feeder.csv",
           "base_load": "base.csv", "scenario": {"catalog": 1}}
    (tmp_path / "run.yaml").write_text(yaml.safe_dump(cfg))
    return tmp_path


def test_feeder_roundtrip(files):
    f = load_feeder(files / "feeder.csv")
    ref = fx.twelve_bus_feeder()
    assert f.substation == "sub"
    assert sorted(f.regulator_sites) == sorted(ref.regulator_sites)
    assert np.allclose(f.load_shares(), ref.load_shares())


def test_duplicate_bus(files):
    p = files / "dup.csv"
    p.write_text("branch_id,from_bus,to_bus,r_pu,x_pu,load_share\n1,a,b,0.01,0.01,1\n2,a,b,0.01,0.01,1\n")
    with pytest.raises(InputError) as ei:
        load_feeder(p)
    assert ei.value.line == 3 and ei.value.column == "to_bus"


def test_bad_number_location(files):
    p = files / "bad.csv"
    p.write_text("branch_id,from_bus,to_bus,r_pu,x_pu,load_share\n1,a,b,zero,0.01,1\n")
    with pytest.raises(InputError) as ei:
        load_feeder(p)
    assert (ei.value.line, ei.value.column) == (2, "r_pu")


def test_cycle_in_csv(files):
    p = files / "cyc.csv"
    p.write_text("branch_id,from_bus,to_bus,r_pu,x_pu,load_share\n1,s,a,.01,.01,1\n2,a,b,.01,.01,1\n3,b,a2,.01,.01,1\n4,a2,b,.01,.01,1\n")
    with pytest.raises(InputError):
        load_feeder(p)


def test_short_year_names_expected_count(tmp_path):
    write_base(tmp_path / "y.csv", 35_039)
    with pytest.raises(InputError, match="expected 35040"):
        load_base_csv(tmp_path / "y.csv", 35_040)


def test_missing_q_warns(tmp_path, caplog):
    write_base(tmp_path / "b.csv", 96, q=False)
    with caplog.at_level(logging.WARNING):
        prof = load_base_csv(tmp_path / "b.csv", 96)
    assert prof.q_kvar is None
    assert "q_kvar" in caplog.text


def test_irregular_timestamps(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("timestamp,p_kw\n2019-01-01T00:00:00,1\n2019-01-01T00:30:00,1\n")
    with pytest.raises(InputError) as ei:
        load_base_csv(p, 2)
    assert ei.value.line == 3


def test_slot_index_and_negative(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("slot,p_kw\n0,1\n1,-2\n")
    with pytest.raises(InputError) as ei:
        load_base_csv(p, 2)
    assert ei.value.column == "p_kw"


def test_params_provenance(tmp_path):
    p = tmp_path / "params.yaml"
    p.write_text("c_o: 70000.0\nkappa: 0.01\n")
    ps = load_params(p)
    assert ps.provenance["c_o"] == "PAPER"
    assert ps.provenance["kappa"] == "USER"
    assert ps.vr().kappa == 0.01
    p.write_text("nonsense: 1\n")
    with pytest.raises(InputError):
        load_params(p)


def test_shipped_params_match_defaults():
    from pathlib import Path
    ps = load_params(Path(__file__).parents[1] / "configs" / "params.yaml")
    assert all(v in ("PAPER", "DEFAULT") for v in ps.provenance.values())


def test_scenario_forms(files):
    b = load_config(files / "run.yaml", {"scenario": {"pl": [50, 100], "area": "urban"}})
    assert list(b.fleets) == ["urban_pl50", "urban_pl100"]
    with pytest.raises(InputError):
        load_config(files / "run.yaml", {"scenario": {"catalog": 1, "pl": 50}})


def test_malformed_yaml(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("seed: [1,\n")
    with pytest.raises(InputError) as ei:
        load_config(p)
    assert ei.value.line is not None


def test_validate_and_run_roundtrip(files, capsys):
    assert main(["validate", "--config", str(files / "run.yaml")]) == 0
    out1, out2 = files / "o1", files / "o2"
    assert main(["run", "--config", str(files / "run.yaml"), "--out", str(out1)]) == 0
    assert main(["run", "--config", str(out1 / "run_manifest.json"), "--out", str(out2)]) == 0
    for name in ("summary.csv", "costs.csv", "run_manifest.json", "timeseries/scenario_1.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    man = json.loads((out1 / "run_manifest.json").read_text())
    assert man["provenance"]["seed"] == 3 and len(man["provenance"]["config_hash"]) == 64
    assert man["params"]["c_o"] == {"provenance": "PAPER", "value": 70000.0}
    header = (out1 / "summary.csv").read_text().splitlines()[0].split(",")
    assert header[:8] == ["scenario", "yearly_lol_pct", "lifetime_yr", "eps_flag", "vr_ops", "vr_lol",
                          "tco_conventional", "tco_reestablished"]


def test_benchmark_and_sweep_commands(files):
    assert main(["benchmark", "--config", str(files / "run.yaml"), "--out", str(files / "b")]) == 0
    rows = (files / "b" / "summary.csv").read_text().splitlines()
    assert len(rows) == 2 and rows[1].startswith("benchmark,")
    assert main(["sweep", "--config", str(files / "run.yaml"), "--pl", "50,100", "--out", str(files / "s"),
                 "--no-timeseries"]) == 0
    assert len((files / "s" / "summary.csv").read_text().splitlines()) == 4


def test_eps_flag_row(files):
    cfg = yaml.safe_load((files / "run.yaml").read_text())
    write_base(files / "hot.csv", 96, p=14_000.0)
    cfg.update(base_load="hot.csv", scenario={"catalog": 9})
    (files / "hot.yaml").write_text(yaml.safe_dump(cfg))
    assert main(["run", "--config", str(files / "hot.yaml"), "--out", str(files / "h"), "--no-timeseries"]) == 0
    row = (files / "h" / "summary.csv").read_text().splitlines()[2].split(",")
    assert row[3] == "true" and float(row[1]) > 200 and float(row[2]) < 0.5


def test_input_error_exit_code(files, capsys):
    assert main(["validate", "--config", str(files / "missing.yaml")]) == 1
    cfg = yaml.safe_load((files / "run.yaml").read_text())
    cfg["horizon_days"] = 2
    (files / "short.yaml").write_text(yaml.safe_dump(cfg))
    assert main(["run", "--config", str(files / "short.yaml"), "--out", str(files / "x")]) == 1
    assert "expected 192" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path):
    (tmp_path / "f.csv").write_text("branch_id,from_bus,to_bus,r_pu,x_pu,load_share\nb,s,a,0.5,1.0,1\n")
    write_base(tmp_path / "b.csv", 96, p=50_000.0)
    (tmp_path / "c.yaml").write_text(yaml.safe_dump(
        {"horizon_days": 1, "iterations": 1, "feeder": "f.csv", "base_load": "b.csv", "scenario": {"catalog": 1}}))
    assert main(["benchmark", "--config", str(tmp_path / "c.yaml"), "--out", str(tmp_path / "o")]) == 2
