"""
Throughput vs. distance vs. predictive metric in the urban preset
=================================================================

A small campaign: three metric families, a few seeds, shortened runs.
The full comparison uses 25 seeds (see tests/test_acceptance.py).
"""

import sys
import tempfile

from batsim.campaign import emit_summary, read_aggregate, run_campaign
from batsim.config import SweepSpec, build_config

seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 3
cfg = build_config({"scenario.preset": "urban", "scenario.duration": 90.0,
                    "scenario.name": "urban"})
sweep = SweepSpec({"metric.family": ["throughput", "distance", "predictive"]})

with tempfile.TemporaryDirectory() as out:
    res = run_campaign(cfg, sweep, out, seeds=seeds)
    for row in res.rows:
        print(row.metric_family, row.seed, f"pdr={row.pdr:.3f}")
    print()
    print(emit_summary(read_aggregate(f"{out}/aggregate.csv"), "metric-comparison"))
