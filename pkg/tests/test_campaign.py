import csv
import json

import pytest

from batsim import campaign
from batsim.campaign import (
    AGG_FIELDS, MissingSeries, emit_summary, read_aggregate, run_campaign, runs_csv,
)
from batsim.cli import main
from batsim.config import SweepSpec, ValidationError, build_config
from batsim.simulation import run_scenario
from batsim.traffic import KpiRow

TINY = {"scenario.nodes": 4, "scenario.duration": 12.0, "traffic.start": 4.0,
        "playground.x": 300.0, "playground.y": 300.0, "traffic.rate": 2e6}


def tiny(**extra):
    return build_config({**TINY, **extra})


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_one_point_three_seeds(tmp_path):
    res = run_campaign(tiny(**{"scenario.seeds": 3}), SweepSpec(), tmp_path, parallel=1)
    assert res.exit_code == 0
    runs = read_csv(tmp_path / "runs.csv")
    assert runs[0] == list(KpiRow.CSV_FIELDS)
    assert [r[0] for r in runs[1:]] == ["1", "2", "3"]
    agg = read_csv(tmp_path / "aggregate.csv")
    assert agg[0] == list(AGG_FIELDS) and len(agg) == 2
    assert json.loads((tmp_path / "manifest.json").read_text())["complete"] is True


def test_sweep_expansion_counts(tmp_path):
    sweep = SweepSpec({"mobility.speed": [5.0, 10.0, 15.0, 20.0]})
    res = run_campaign(tiny(), sweep, tmp_path, seeds=2, parallel=1)
    assert len(res.rows) == 8
    recs = read_aggregate(tmp_path / "aggregate.csv")
    assert [r["speed_mps"] for r in recs] == [5.0, 10.0, 15.0, 20.0]
    assert all(r["runs"] == 2 for r in recs)
    table = emit_summary(recs, "speed-sweep").splitlines()
    assert table[0].split("\t")[:3] == ["speed_mps", "throughput_pdr", "throughput_pdr_ci95"]
    assert len(table) == 5


def test_campaign_cap(tmp_path):
    cfg = tiny(**{"campaign.max_runs": 10})
    with pytest.raises(ValidationError):
        run_campaign(cfg, SweepSpec({"mobility.speed": [1.0, 2.0, 3.0]}), tmp_path, seeds=4)


def test_failed_and_missing_runs_in_manifest(tmp_path, monkeypatch):
    real = campaign._run_one

    def flaky(cfg, seed, label):
        if seed == 2:
            raise RuntimeError("boom")
        if seed == 3:
            raise KeyboardInterrupt
        return real(cfg, seed, label)

    monkeypatch.setattr(campaign, "_run_one", flaky)
    res = run_campaign(tiny(), SweepSpec(), tmp_path, seeds=4, parallel=1)
    assert res.exit_code == 1
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["complete"] is False and manifest["completed"] == 1
    assert [f["seed"] for f in manifest["failed"]] == [2]
    assert [m["seed"] for m in manifest["missing"]] == [3, 4]
    assert len(read_csv(tmp_path / "runs.csv")) == 2    # partial results kept


def test_seed_isolation_and_parallel_identity(tmp_path):
    cfg = tiny()
    res = run_campaign(cfg, SweepSpec(), tmp_path / "par", seeds=3, parallel=2)
    alone = run_scenario(cfg, 2, label=cfg.label())
    lines = runs_csv(res.rows).splitlines()
    assert lines[2] == runs_csv([alone.row]).splitlines()[1]
    assert res.hashes[(cfg.label(), 2)] == alone.trace_hash


def rec(family, pdr, preset="urban"):
    r = {"scenario": f"s;metric.family={family}", "metric_family": family, "runs": 2,
         "preset": preset, "probing": False, "probe_size": 200, "speed_mps": 12.5,
         "rate_bps": 1e7, "streams": 1}
    for k in campaign.AGG_KPIS:
        r[k], r[f"ci95_{k}"] = pdr, 0.01
    return r


def test_metric_comparison_table():
    recs = [rec(f, p) for f, p in (("throughput", 0.4), ("distance", 0.5), ("predictive", 0.6))]
    lines = emit_summary(recs, "metric-comparison").splitlines()
    header = lines[0].split("\t")
    assert header[0] == "preset" and "predictive_pdr" in header and len(lines) == 2
    assert lines[1].split("\t")[header.index("distance_pdr")] == "0.5"
    with pytest.raises(MissingSeries):
        emit_summary([rec("throughput", 0.4)], "metric-comparison")
    empty = emit_summary([], "metric-comparison")
    assert empty.count("\n") == 1 and empty.startswith("preset\tthroughput_pdr")


def test_cli_verbs(tmp_path, capsys):
    cfgfile = tmp_path / "s.cfg"
    cfgfile.write_text("".join(f"{k} = {v}\n" for k, v in TINY.items()))
    assert main(["validate-config", "--config", str(cfgfile), "--set", "scenario.nodes=-1"]) == 2
    capsys.readouterr()
    assert main(["run", "--config", str(cfgfile), "--seed", "5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("seed,scenario,metric_family,pdr") and out[1].startswith("5,")
    routes = tmp_path / "routes.csv"
    assert main(["dump-routes", "--config", str(cfgfile), "--out", str(routes)]) == 0
    rows = read_csv(routes)
    assert rows[0] == ["time", "node", "destination", "next_hop", "metric_normalized"]
    assert len(rows) > 1
    camp = tmp_path / "camp"
    assert main(["sweep", "--config", str(cfgfile), "--seeds", "2", "--out", str(camp),
                 "--parallel", "1", "--set", "sweep.x=1"]) == 2
    assert main(["sweep", "--config", str(cfgfile), "--seeds", "2", "--out", str(camp),
                 "--parallel", "1"]) == 0
    assert main(["summarize", "--out", str(camp), "--figure", "load-sweep"]) == 0
    assert (camp / "load-sweep.tsv").read_text().startswith("rate_bps\t")
    assert main(["summarize", "--out", str(camp), "--figure", "metric-comparison"]) == 1
