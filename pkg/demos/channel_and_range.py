"""
Path loss, fading and the range estimate
========================================

Received power under the three channel variants, and the transmission
range d_max that the distance-based metrics normalise by.
"""

import random
from importlib import resources

import numpy as np

from batsim.channel import (
    FriisGeneralized, Nakagami, RadioConfig, load_empirical_table, max_range,
    mean_received_power, received_power,
)

radio = RadioConfig()            # 20 dBm, 2.4 GHz, -83 dBm sensitivity
friis = FriisGeneralized(eta=2.65)
naka = Nakagami(m=2.0, eta=2.65)
with resources.as_file(resources.files("batsim") / "data" / "sample_empirical.csv") as p:
    table = load_empirical_table(p)

# mean received power over distance
for d in (10, 50, 100, 200, 237, 300):
    print(f"{d:4d} m  friis {mean_received_power(friis, radio, d):7.2f} dBm"
          f"  table {mean_received_power(table, radio, d):7.2f} dBm")

# d_max: the largest distance whose mean power still meets the sensitivity
for name, model in (("friis", friis), ("nakagami", naka), ("table", table)):
    print(f"d_max {name:9s} {max_range(model, radio):7.2f} m")

# Nakagami draws scatter around the Friis mean; at d_max roughly half are lost
rng = random.Random(1)
at_edge = np.array([received_power(naka, radio, 237.0, rng) for _ in range(20000)])
print("fraction of fades above sensitivity at 237 m:", (at_edge >= -83).mean().round(3))
