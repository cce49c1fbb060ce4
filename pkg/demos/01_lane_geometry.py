"""Lane geometry walkthrough: projections, curvature, velocity profiles.

Builds a straight-then-curved lane, projects points into the Frenet frame
and back, and derives the curvature-limited velocity profile that the
behavior layer later feeds to the driver models.
"""

import numpy as np

from roadplan.road import Lane, Polyline, velocity_profile

# a lane that runs straight for 80 m, then bends left on a 25 m radius
phi = np.linspace(0.0, np.pi / 2, 120)
arc = np.column_stack((80.0 + 25.0 * np.sin(phi), 25.0 * (1.0 - np.cos(phi))))
center = np.vstack((np.column_stack((np.linspace(0, 80, 60, endpoint=False), np.zeros(60))), arc))
lane = Lane.build("demo", center, width=3.5, speed_limit=13.89)

print("lane length:", round(lane.centerline.length, 2), "m")

# Frenet round trip: off-center points project back to where they started
for point in ([20.0, 1.0], [95.0, 8.0]):
    s, d, _ = lane.centerline.project(point)
    rebuilt = lane.centerline.frenet_to_cartesian(s, d)
    print(f"point {point} -> s={s:7.2f} d={d:+.2f} -> back {np.round(rebuilt, 6)}")

# curvature is zero on the straight, ~1/25 on the arc
kappa = lane.centerline.vertex_curvature()
s_axis = lane.centerline.s
print("max |curvature| on straight:", abs(kappa[s_axis < 70]).max())
print("curvature mid-arc:          ", round(kappa[np.argmin(np.abs(s_axis - 110))], 4))

# the velocity profile caps speed with lateral comfort and bounded
# (de)acceleration between samples
profile = velocity_profile(lane.centerline, lane.speed_limit, a_lat_max=2.0, a_lon_comf=1.5)
print("profile at s=10:", round(profile.value(10.0), 2), "m/s (speed limit)")
print("profile mid-arc:", round(profile.value(110.0), 2), "m/s (~sqrt(a_lat*R))")
dv2 = np.abs(np.diff(profile.v**2))
print("decel bound respected:", bool(np.all(dv2 <= 2 * 1.5 * np.diff(profile.s) + 1e-9)))
