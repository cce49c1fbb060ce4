"""Behavior candidates at a crossing conflict.

A vehicle approaches a conflict point from the side; the generator emits
go-before / yield / stop candidates, the social cost weighs the ego's
progress against the braking forced onto the other vehicle, and the
selected maneuver comes with its spatio-temporal corridor.
"""

import numpy as np

from roadplan.behavior import (
    behavior_cost,
    find_conflicts,
    generate_candidates,
    predict_hypotheses,
    select_behavior,
)
from roadplan.config import PlannerConfig
from roadplan.road import Conflict, Lane, RoadMap, VehicleState

cfg = PlannerConfig()
ego_lane = Lane.build("ego", [[0, 0], [200, 0]], width=3.5, speed_limit=13.89)
cross = Lane.build("cross", [[60, -100], [60, 100]], width=3.5, speed_limit=13.89)
road = RoadMap([ego_lane, cross], [Conflict("ego", 60.0, "cross", 100.0)])
route = road.route(["ego"])
profile = road.profile(route, cfg.a_lat_max, cfg.a_lon_comf)

vehicles = {"crosser": VehicleState(x=60.0, y=-25.0, heading=np.pi / 2, v=10.0)}
hypotheses = predict_hypotheses(road, vehicles, cfg)
print("hypotheses:", [(h.vehicle_id, h.option, h.probability) for h in hypotheses])

ego_s, ego_v = 30.0, 11.0
conflicts = find_conflicts(road, route, ego_s, hypotheses, cfg)
print("conflicts ahead:", [(c.vehicle_id, round(c.s_conflict_ego, 1)) for c in conflicts])

candidates = generate_candidates(ego_s, ego_v, route, profile.value, None, conflicts, cfg)
for cand in candidates:
    j = behavior_cost(cand, hypotheses, cfg)
    print(f"  {cand.maneuver:18s} cost {j:7.3f}  final v {cand.v[-1]:5.2f}")

chosen, corridor = select_behavior(candidates, hypotheses, conflicts, route, cfg)
print("selected:", chosen.maneuver)
print("corridor upper bound: starts at", round(corridor.s_max[0], 1),
      "m, ends at", round(corridor.s_max[-1], 1), "m")
print("corridor contains the candidate:", corridor.contains(chosen.s))
