"""
How each metric family updates an OGM
=====================================

A node receives an OGM carrying reverse path metric psi_hat through a
forwarder F and computes its own path metric toward the originator.
"""

from batsim.metrics import (
    UINT32_MAX, Distance, HopCount, LinkObservation, Predictive, Throughput, denormalize,
    normalize, theta,
)

psi_hat = normalize(UINT32_MAX)   # fresh OGM straight from the originator
phi = 0.8                          # EWMA link quality toward F
d_max = 237.35

# F is 100 m away now, and will be 180 m away after the lookahead
obs = LinkObservation(neighbor_distance=100.0, neighbor_predicted_distance=180.0)

families = [Throughput(), HopCount(), Distance(alpha=2.0, d_max=d_max),
            Predictive(alpha=2.0, d_max=d_max, tau=4.0)]
for fam in families:
    psi = theta(fam, psi_hat, phi, obs)
    print(f"{fam.name:10s} psi = {psi:.4f}  (on the wire: {denormalize(psi)})")

# Prediction only ever adds penalty: a departing forwarder looks worse than
# an equally distant one that stays put.
staying = LinkObservation(neighbor_distance=100.0, neighbor_predicted_distance=100.0)
fam = Predictive(alpha=2.0, d_max=d_max, tau=4.0)
print("staying", round(theta(fam, 1.0, 1.0, staying), 4),
      "leaving", round(theta(fam, 1.0, 1.0, obs), 4))
