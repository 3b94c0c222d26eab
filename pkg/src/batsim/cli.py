"""Command line front end: ``batsim {run,sweep,summarize,dump-routes,validate-config}``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import Optional, Sequence

from .campaign import (
    EXIT_CONFIG, EXIT_OK, FIGURES, MissingSeries, emit_summary, read_aggregate, run_campaign,
    runs_csv,
)
from .config import ParseError, ValidationError, load_campaign
from .simulation import Network


def _overrides(args) -> dict[str, str]:
    out = {}
    for item in args.set or ():
        if "=" not in item:
            raise ParseError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    if getattr(args, "preset", None):
        out["scenario.preset"] = args.preset
    if getattr(args, "seeds", None) is not None:
        out["scenario.seeds"] = str(args.seeds)
    return out


def _load(args):
    return load_campaign(args.config, _overrides(args))


def _seed(args, cfg) -> int:
    return cfg["scenario.base_seed"] if args.seed is None else args.seed


def cmd_run(args) -> int:
    cfg, _ = _load(args)
    res = Network(cfg, _seed(args, cfg)).run()
    text = runs_csv([res.row])
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "runs.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    print(f"trace_hash {res.trace_hash}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, sweep = _load(args)
    if not args.out:
        raise ParseError("sweep needs --out DIR")
    res = run_campaign(cfg, sweep, args.out, parallel=args.parallel)
    print(f"{len(res.rows)}/{res.expected} runs completed -> {args.out}", file=sys.stderr)
    return res.exit_code


def cmd_summarize(args) -> int:
    if not args.out:
        raise ParseError("summarize needs --out DIR (a campaign directory)")
    out = Path(args.out)
    figures = [args.figure] if args.figure else sorted(FIGURES)
    records = read_aggregate(out / "aggregate.csv")
    status = EXIT_OK
    for fig in figures:
        try:
            table = emit_summary(records, fig)
        except MissingSeries as exc:
            print(f"{fig}: {exc}", file=sys.stderr)
            status = 1
            continue
        (out / f"{fig}.tsv").write_text(table, encoding="utf-8")
        if args.figure:
            sys.stdout.write(table)
    return status


def cmd_dump_routes(args) -> int:
    cfg, _ = _load(args)
    res = Network(cfg, _seed(args, cfg), record_routes=True).run()
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("time", "node", "destination", "next_hop", "metric_normalized"))
        for t, node, dest, nh, metric in res.routes:
            w.writerow((f"{t:.6f}", node, dest, nh, repr(metric)))
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg, sweep = _load(args)
    sys.stdout.write(cfg.dump())
    for k, vals in sweep.axes.items():
        print(f"sweep.{k} = {', '.join(str(v) for v in vals)}")
    print(f"# {len(sweep)} sweep point(s) x {cfg['scenario.seeds']} seed(s)", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="batsim",
                                description="Mesh routing simulator with geographic metrics.")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, seeds=False):
        sp.add_argument("--config", help="scenario file (section.key = value lines)")
        sp.add_argument("--preset", choices=("rural", "urban"))
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
        if seeds:
            sp.add_argument("--seeds", type=int, metavar="N")

    sp = sub.add_parser("run", help="one seeded run; prints the KPI row")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="also write DIR/runs.csv")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run every sweep point for every seed")
    common(sp, seeds=True)
    sp.add_argument("--out", required=True, metavar="DIR")
    sp.add_argument("--parallel", type=int, metavar="N", help="worker processes (default: cores)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("summarize", help="figure tables from a campaign directory")
    sp.add_argument("--out", required=True, metavar="DIR")
    sp.add_argument("--figure", choices=sorted(FIGURES))
    sp.set_defaults(func=cmd_summarize)

    sp = sub.add_parser("dump-routes", help="periodic routing-table samples of one run")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", metavar="FILE")
    sp.set_defaults(func=cmd_dump_routes)

    sp = sub.add_parser("validate-config", help="print the effective configuration")
    common(sp, seeds=True)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
