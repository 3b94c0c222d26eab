"""
Convergence on a static line and an ideal two-hop stream
========================================================
"""

from batsim.config import build_config
from batsim.simulation import Network, run_scenario

# five nodes 0.6 d_max apart: only direct neighbours hear each other
cfg = build_config({"scenario.nodes": 5, "mobility.model": "static", "mobility.layout": "line",
                    "mobility.spacing_dmax": 0.6, "metric.family": "hopcount",
                    "traffic.streams": 0, "scenario.duration": 5.0})
net = Network(cfg, seed=1)
net.run(duration=3.3)      # ten OGM intervals
for node in net.nodes:
    print(node.id, {dest: nh for dest, nh, _ in node.routing_table()})

# a three node chain carrying 2 Mbit/s from end to end
chain = cfg.replace({"scenario.nodes": "3", "traffic.streams": "1", "traffic.source": "0",
                     "traffic.destination": "2", "traffic.rate": "2e6",
                     "scenario.duration": "60"})
row = run_scenario(chain, seed=1).row
print(f"PDR {row.pdr:.4f}, mean delay {row.mean_delay_s * 1e3:.3f} ms, sent {row.sent}")
