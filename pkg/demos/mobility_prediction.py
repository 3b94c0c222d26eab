"""
Random waypoint and trajectory lookahead
========================================

Nodes know their next waypoint in advance, so the position announced for
t + tau follows the real path, corners included.
"""

import math

from batsim.engine import RngStreams
from batsim.mobility import Playground, RandomWaypoint

streams = RngStreams(seed=3)
rwp = RandomWaypoint(4, Playground(600, 600, 10), 10.0, 15.0,
                     lambda i: streams.stream("mobility", i))

tau = 4.0
for t in (0.0, 20.0, 40.0, 60.0):
    now = rwp.position_at(0, t)
    pred = rwp.predict_position(0, t, tau)
    real = rwp.position_at(0, t + tau)
    print(f"t={t:4.0f}s  now=({now[0]:6.1f},{now[1]:6.1f})  "
          f"predicted=({pred[0]:6.1f},{pred[1]:6.1f})  error={math.dist(pred, real):.2e} m")

# pairwise distance now and after the lookahead, as the predictive metric sees it
a, b = 0, 1
t = 30.0
print("d(t)      =", round(math.dist(rwp.position_at(a, t), rwp.position_at(b, t)), 1))
print("d(t + tau) =", round(math.dist(rwp.predict_position(a, t, tau),
                                      rwp.predict_position(b, t, tau)), 1))
