"""Emergency trajectory generation: two sequential convex programs.

A longitudinal minimum-jerk braking profile bounded by the stop distance,
then a lateral offset profile inside a corridor; infeasibility of the
longitudinal problem triggers the evasive attempt.
"""

import numpy as np

from roadplan.emergency import (
    Infeasible,
    LatParams,
    LonParams,
    solve_emergency_lon,
    solve_emergency_lat,
    assemble_emergency_trajectory,
)
from roadplan.road import Polyline

# feasible: 10 m/s with 10 m available (braking distance 6.25 m)
lon = solve_emergency_lon(
    LonParams(v0=10.0, a0=0.0, a_min=-8.0, s_stop=10.0, dt=0.05, n=60)
)
print(f"stops after {lon.s[-1]:.2f} m (bound 10 m), final speed {lon.v[-1]:.3f} m/s")
print(f"peak deceleration {lon.a.min():.2f} m/s^2")

# infeasible: 20 m/s cannot stop within 10 m at -8 m/s^2
try:
    solve_emergency_lon(LonParams(v0=20.0, a0=0.0, a_min=-8.0, s_stop=10.0, dt=0.05, n=60))
except Infeasible as exc:
    print("20 m/s within 10 m:", exc)

# lateral evasion: the corridor forces at least 1 m of offset late in the
# horizon (an obstacle edge), bounded lateral acceleration
n = 60
d_min = np.full(n, -1.5)
d_max = np.full(n, 4.0)
d_min[35:] = 1.0
lat = solve_emergency_lat(
    LatParams(d_min=d_min, d_max=d_max, a_lat_max=5.0, dt=0.05), lon
)
print(f"lateral profile: 0 -> {lat[-1]:.2f} m, max offset {lat.max():.2f} m")

path = Polyline([[0.0, 0.0], [100.0, 0.0]])
points = assemble_emergency_trajectory(lon, lat, path)
print("assembled trajectory:", len(points), "points, final", np.round(points[-1], 2))
