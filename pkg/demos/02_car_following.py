"""Car-following models: plain vs. enhanced acceleration.

Shows the enhanced model's softer reaction when closing in on a slower
leader, the equilibrium gap, and a virtual leader that maps a vehicle on
a conflicting lane onto the ego lane.
"""

import numpy as np

from roadplan.drivers import (
    IdmParams,
    LeaderObservation,
    eidm_accel,
    idm_accel,
    idm_equilibrium_gap,
    integrate_along_lane,
    virtual_leader,
)

params = IdmParams(a=1.4, b=2.0, v_target=15.0)

print("approach at 20 m/s, leader at 20 m/s, 10 m gap:")
obs = LeaderObservation(gap=10.0, dv=0.0, leader_accel=0.0)
print(f"  plain:    {idm_accel(20.0, obs, params):+.2f} m/s^2")
print(f"  enhanced: {eidm_accel(20.0, obs, params):+.2f} m/s^2  (softer)")

print("\nequilibrium gap behind a 10 m/s leader:",
      round(idm_equilibrium_gap(10.0, params), 2), "m")

# roll out following a stationary leader 40 m ahead
trace = []
s, v = 0.0, 12.0
for _ in range(600):
    obs = LeaderObservation(gap=40.0 - s, dv=v)
    out = integrate_along_lane((s, v), [obs], params, dt=0.05, n_steps=1)
    s, v = out[1, 0], out[1, 1]
    trace.append((s, v))
print(f"stops {40.0 - trace[-1][0]:.2f} m behind a stationary leader")

# a vehicle 30 m from a conflict point it shares with the ego
obs = virtual_leader(
    ego_s=0.0, ego_v=12.0, conflict_ego_s=50.0, conflict_other_s=30.0,
    other_s=2.25, other_v=9.0, other_length=4.5, margin=3.0,
)
print(f"virtual leader gap {obs.gap:.1f} m, closing at {obs.dv:.1f} m/s")
print("yield reaction:", round(eidm_accel(12.0, obs, params), 2), "m/s^2")
