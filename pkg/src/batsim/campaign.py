"""Seeded multi-run campaigns, result files and plot-ready summary tables.

A campaign directory holds:

``runs.csv``       one KPI row per (sweep point, seed)
``traces.csv``     the trace hash of each run
``aggregate.csv``  mean and ci95 per sweep point, plus the axis values used by figures
``manifest.json``  expected / completed / failed runs
``config.cfg``     the effective base configuration
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from .config import ScenarioConfig, SweepSpec, ValidationError
from .simulation import run_scenario
from .traffic import KPI_FIELDS, KpiRow, mean_ci95

AGG_KPIS = KPI_FIELDS + ("drops_noroute", "drops_collision", "drops_sensitivity", "drops_queue")
AXIS_FIELDS = ("preset", "probing", "probe_size", "speed_mps", "rate_bps", "streams")
AGG_FIELDS = (("scenario", "metric_family", "runs") + AXIS_FIELDS
              + tuple(x for k in AGG_KPIS for x in (k, f"ci95_{k}")))

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


class MissingSeries(LookupError):
    pass


@dataclass
class CampaignResult:
    exit_code: int
    expected: int
    rows: list[KpiRow] = field(default_factory=list)
    hashes: dict[tuple[str, int], str] = field(default_factory=dict)
    failed: list[dict[str, Any]] = field(default_factory=list)
    missing: list[dict[str, Any]] = field(default_factory=list)


def seed_list(cfg: ScenarioConfig, seeds: Optional[int] = None) -> list[int]:
    n = cfg["scenario.seeds"] if seeds is None else seeds
    base = cfg["scenario.base_seed"]
    return list(range(base, base + n))


def expand(cfg: ScenarioConfig, sweep: SweepSpec, seeds: Sequence[int]):
    """(point index, point, config, label, seed) for every run, refusing oversized campaigns."""
    total = len(sweep) * len(seeds)
    if total > cfg["campaign.max_runs"]:
        raise ValidationError("campaign.max_runs",
                              f"campaign has {total} runs, cap is {cfg['campaign.max_runs']}")
    jobs = []
    for i, point in enumerate(sweep.points()):
        pcfg = cfg.replace(point)
        label = cfg.label(point)
        for s in seeds:
            jobs.append((i, point, pcfg, label, s))
    return jobs


def _run_one(cfg: ScenarioConfig, seed: int, label: str) -> tuple[KpiRow, str]:
    res = run_scenario(cfg, seed, label=label)
    return res.row, res.trace_hash


def run_campaign(cfg: ScenarioConfig, sweep: SweepSpec, out_dir: str | Path, *,
                 seeds: Optional[int] = None, parallel: Optional[int] = None) -> CampaignResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = expand(cfg, sweep, seed_list(cfg, seeds))
    (out / "config.cfg").write_text(cfg.dump() + "".join(
        f"sweep.{k} = {', '.join(_cell(v) for v in vals)}\n" for k, vals in sweep.axes.items()))
    workers = max(1, min(parallel or os.cpu_count() or 1, len(jobs) or 1))

    done: dict[int, tuple[KpiRow, str]] = {}
    failed: list[dict[str, Any]] = []
    interrupted = False
    try:
        if workers == 1:
            for k, (_, point, pcfg, label, s) in enumerate(jobs):
                try:
                    done[k] = _run_one(pcfg, s, label)
                except Exception as exc:  # keep going; report in the manifest
                    failed.append({"point": point, "seed": s, "error": repr(exc)})
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futs = {pool.submit(_run_one, pcfg, s, label): k
                        for k, (_, _, pcfg, label, s) in enumerate(jobs)}
                for fut in as_completed(futs):
                    k = futs[fut]
                    try:
                        done[k] = fut.result()
                    except Exception as exc:
                        failed.append({"point": jobs[k][1], "seed": jobs[k][4],
                                       "error": repr(exc)})
    except KeyboardInterrupt:
        interrupted = True

    failed_keys = {(json.dumps(f["point"], sort_keys=True), f["seed"]) for f in failed}
    missing = [{"point": j[1], "seed": j[4]} for k, j in enumerate(jobs)
               if k not in done and (json.dumps(j[1], sort_keys=True), j[4]) not in failed_keys]
    ordered = [done[k] for k in sorted(done)]
    rows = [r for r, _ in ordered]
    hashes = {(r.scenario, r.seed): h for r, h in ordered}

    write_runs(out / "runs.csv", rows)
    with open(out / "traces.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("seed", "scenario", "metric_family", "trace_hash"))
        for r, h in ordered:
            w.writerow((r.seed, r.scenario, r.metric_family, h))
    configs = {j[3]: j[2] for j in jobs}
    write_aggregate(out / "aggregate.csv", rows, configs)

    complete = not failed and not missing and not interrupted
    manifest = {"complete": complete, "expected": len(jobs), "completed": len(done),
                "failed": failed, "missing": missing}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return CampaignResult(EXIT_OK if complete else EXIT_PARTIAL, len(jobs), rows, hashes,
                          failed, missing)


# -- files -----------------------------------------------------------------

def runs_csv(rows: Iterable[KpiRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(KpiRow.CSV_FIELDS)
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


def write_runs(path: Path, rows: Iterable[KpiRow]) -> None:
    Path(path).write_text(runs_csv(rows), encoding="utf-8")


def axis_values(cfg: ScenarioConfig) -> dict[str, Any]:
    return {"preset": cfg["scenario.preset"],
            "probing": cfg["routing.probing"],
            "probe_size": cfg["routing.probe_size"],
            "speed_mps": (cfg["mobility.speed_min"] + cfg["mobility.speed_max"]) / 2,
            "rate_bps": cfg["traffic.rate"],
            "streams": cfg["traffic.streams"]}


def aggregate_rows(rows: Sequence[KpiRow], configs: Mapping[str, ScenarioConfig]
                   ) -> list[dict[str, Any]]:
    """One record per scenario label, in first-seen order. Single-run groups get NA widths."""
    groups: dict[str, list[KpiRow]] = {}
    for r in rows:
        groups.setdefault(r.scenario, []).append(r)
    out = []
    for label, grp in groups.items():
        rec: dict[str, Any] = {"scenario": label, "metric_family": grp[0].metric_family,
                               "runs": len(grp)}
        rec.update(axis_values(configs[label]))
        for k in AGG_KPIS:
            est = mean_ci95([float(getattr(r, k)) for r in sorted(grp, key=lambda r: r.seed)])
            rec[k], rec[f"ci95_{k}"] = est.mean, est.ci95
        out.append(rec)
    return out


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "NA" if math.isnan(v) else repr(v)
    return str(v)


def write_aggregate(path: Path, rows: Sequence[KpiRow],
                    configs: Mapping[str, ScenarioConfig]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_FIELDS)
        for rec in aggregate_rows(rows, configs):
            w.writerow([_cell(rec[f]) for f in AGG_FIELDS])


def read_aggregate(path: str | Path) -> list[dict[str, Any]]:
    recs = []
    with open(path, newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            rec: dict[str, Any] = {}
            for k, v in raw.items():
                if k in ("scenario", "metric_family", "preset"):
                    rec[k] = v
                elif k == "probing":
                    rec[k] = v == "true"
                elif k in ("runs", "probe_size", "streams"):
                    rec[k] = int(v)
                else:
                    rec[k] = math.nan if v == "NA" else float(v)
            recs.append(rec)
    return recs


# -- figure tables -----------------------------------------------------------

@dataclass(frozen=True)
class Figure:
    x_name: str
    kpis: tuple[str, ...]
    required: tuple[str, ...] = ()

    def x(self, rec: Mapping[str, Any]):
        if self.x_name == "probing":
            return f"{rec['preset']}:" + (str(rec["probe_size"]) if rec["probing"] else "off")
        return rec[self.x_name]


FIGURES = {
    "elp-probing": Figure("probing", ("data_rate_bps", "pdr")),
    "metric-comparison": Figure("preset", ("pdr", "mean_delay_s"),
                                ("throughput", "distance", "predictive")),
    "speed-sweep": Figure("speed_mps", ("pdr", "mean_delay_s")),
    "load-sweep": Figure("rate_bps", ("pdr", "mean_delay_s")),
    "stream-sweep": Figure("streams", ("pdr", "mean_delay_s")),
}


def emit_summary(records: Sequence[Mapping[str, Any]], figure: str) -> str:
    """Tab-separated table: x, then mean and ci95 of each KPI for every family."""
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; choose from {sorted(FIGURES)}")
    fig = FIGURES[figure]
    present = list(dict.fromkeys(r["metric_family"] for r in records))
    if records:
        absent = [f for f in fig.required if f not in present]
        if absent:
            raise MissingSeries(f"{figure} needs families {absent}, campaign has {present}")
    families = list(fig.required) or present
    header = [fig.x_name] + [c for fam in families for k in fig.kpis
                             for c in (f"{fam}_{k}", f"{fam}_{k}_ci95")]
    cells: dict[Any, dict[str, Mapping[str, Any]]] = {}
    for r in records:
        slot = cells.setdefault(fig.x(r), {})
        if r["metric_family"] in slot:
            raise ValueError(f"{figure}: several sweep points share x={fig.x(r)!r} for "
                             f"{r['metric_family']}; sweep one axis at a time")
        slot[r["metric_family"]] = r
    lines = ["\t".join(header)]
    for x in sorted(cells, key=lambda v: (isinstance(v, str), v)):
        row = [_cell(x)]
        for fam in families:
            rec = cells[x].get(fam)
            for k in fig.kpis:
                row += ([_cell(float(rec[k])), _cell(float(rec[f"ci95_{k}"]))] if rec
                        else ["NA", "NA"])
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"
