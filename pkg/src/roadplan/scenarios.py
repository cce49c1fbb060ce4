"""Built-in simulation scenarios.

Four parameterized setups: an overtaking lane change on a two-lane road, a
roundabout merge behind circulating traffic, a left turn across a
prioritized crossing vehicle, and an emergency stop in front of a revealed
stationary obstacle.
"""

from __future__ import annotations

import numpy as np

from .road import Conflict, Lane, RoadMap
from .simulate import Scenario, ScenarioVehicle


def _arc(center, radius, theta0, theta1, n=None):
    if n is None:
        n = max(12, int(abs(theta1 - theta0) * radius / 0.5))
    theta = np.linspace(theta0, theta1, n)
    return np.column_stack(
        (center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta))
    )


def scenario_lane_change(seed: int = 0) -> Scenario:
    """Slow leader ahead on the right lane, empty left lane.

    The ego closes in, the incentive fires, and the maneuver sequence is
    LTM, lane change, LTM with the left lane as the final lane.
    """
    limit = 16.7
    right = Lane.build(
        "right", [[0.0, 0.0], [450.0, 0.0]], width=3.5, speed_limit=limit,
        left_neighbor="left",
    )
    left = Lane.build(
        "left", [[0.0, 3.5], [450.0, 3.5]], width=3.5, speed_limit=limit,
        right_neighbor="right",
    )
    road = RoadMap([right, left])
    ego = ScenarioVehicle("ego", "right", s0=10.0, v0=13.0, route=["right"])
    leader = ScenarioVehicle(
        "lead", "right", s0=140.0, v0=12.0, route=["right"], v_target=12.0
    )
    return Scenario(
        name="lane_change",
        road=road,
        ego=ego,
        vehicles=[leader],
        duration=18.0,
        seed=seed,
        config_overrides={"idm": {"v_target": limit}, "sim_v_max": 18.0},
    )


def scenario_roundabout(seed: int = 0) -> Scenario:
    """Single-lane roundabout with one circulating and one entering vehicle.

    The ego yields at the entry, merges behind the circulating vehicle, and
    exits east; the other entering vehicle arrives later and follows.
    """
    R = 15.0
    ring1 = Lane.build(
        "ring1", _arc((0, 0), R, np.pi, 1.5 * np.pi), width=3.5,
        speed_limit=8.0, successors=("ring2",), lane_type="roundabout",
    )
    ring2 = Lane.build(
        "ring2", _arc((0, 0), R, 1.5 * np.pi, 2.0 * np.pi), width=3.5,
        speed_limit=8.0, successors=("ring3", "exit_e"), lane_type="roundabout",
    )
    ring3 = Lane.build(
        "ring3", _arc((0, 0), R, 0.0, 0.5 * np.pi), width=3.5,
        speed_limit=8.0, successors=("ring4",), lane_type="roundabout",
    )
    ring4 = Lane.build(
        "ring4", _arc((0, 0), R, 0.5 * np.pi, np.pi), width=3.5,
        speed_limit=8.0, successors=("ring1",), lane_type="roundabout",
    )
    entry_s = Lane.build(
        "entry_s", [[-75.0, -R], [0.0, -R]], width=3.5, speed_limit=13.89,
        successors=("ring2",), lane_type="intersection_approach",
    )
    entry_w = Lane.build(
        "entry_w", [[-R, 75.0], [-R, 0.0]], width=3.5, speed_limit=13.89,
        successors=("ring1",), lane_type="intersection_approach",
    )
    exit_e = Lane.build(
        "exit_e", [[R, 0.0], [R, 160.0]], width=3.5, speed_limit=13.89,
    )
    conflicts = [
        Conflict("entry_s", entry_s.centerline.length, "ring1", ring1.centerline.length),
        Conflict("entry_w", entry_w.centerline.length, "ring4", ring4.centerline.length),
    ]
    road = RoadMap(
        [ring1, ring2, ring3, ring4, entry_s, entry_w, exit_e], conflicts
    )
    ego = ScenarioVehicle(
        "ego", "entry_s", s0=15.0, v0=10.0, route=["entry_s", "ring2", "exit_e"]
    )
    circulating = ScenarioVehicle(
        "circ", "ring1", s0=2.0, v0=5.5, route=["ring1", "ring2", "ring3", "ring4"]
    )
    entering = ScenarioVehicle(
        "enter_w", "entry_w", s0=20.0, v0=9.0,
        route=["entry_w", "ring1", "ring2", "exit_e"],
    )
    return Scenario(
        name="roundabout",
        road=road,
        ego=ego,
        vehicles=[circulating, entering],
        duration=24.0,
        seed=seed,
        config_overrides={"idm": {"v_target": 13.89}, "conflict_half_width": 8.0},
    )


def scenario_left_turn(seed: int = 0) -> Scenario:
    """Left turn across a prioritized crossing vehicle.

    The vehicle from the right (westbound) blocks the merge point until it
    passes; the vehicle from the left approaches on a lane whose only
    successor is its right turn, so its prediction never meets the ego
    path. The ego waits at the entry, then departs.
    """
    app_s = Lane.build(
        "app_s", [[1.75, -80.0], [1.75, -10.0]], width=3.5, speed_limit=13.89,
        successors=("turn_w",), lane_type="intersection_approach",
    )
    turn_w = Lane.build(
        "turn_w", _arc((-10.0, -10.0), 11.75, 0.0, 0.5 * np.pi), width=3.5,
        speed_limit=8.0, successors=("exit_w",), lane_type="intersection_approach",
    )
    exit_w = Lane.build(
        "exit_w", [[-10.0, 1.75], [-90.0, 1.75]], width=3.5, speed_limit=13.89,
    )
    ew = Lane.build(
        "ew", [[135.0, 1.75], [-10.0, 1.75]], width=3.5, speed_limit=13.89,
        successors=("exit_w",),
    )
    we = Lane.build(
        "we", [[-150.0, -1.75], [-10.0, -1.75]], width=3.5, speed_limit=13.89,
        successors=("turn_s",),
    )
    turn_s = Lane.build(
        "turn_s",
        _arc((-10.0, -10.0), 8.25, 0.5 * np.pi, 0.0),
        width=3.5, speed_limit=8.0, successors=("exit_s",),
    )
    exit_s = Lane.build(
        "exit_s", [[-1.75, -10.0], [-1.75, -80.0]], width=3.5, speed_limit=13.89,
    )
    conflicts = [
        Conflict("turn_w", turn_w.centerline.length, "ew", ew.centerline.length),
    ]
    road = RoadMap([app_s, turn_w, exit_w, ew, we, turn_s, exit_s], conflicts)
    ego = ScenarioVehicle(
        "ego", "app_s", s0=30.0, v0=10.0, route=["app_s", "turn_w", "exit_w"]
    )
    from_right = ScenarioVehicle(
        "from_right", "ew", s0=0.0, v0=13.89, route=["ew", "exit_w"]
    )
    from_left = ScenarioVehicle(
        "from_left", "we", s0=0.0, v0=9.0, route=["we", "turn_s", "exit_s"]
    )
    return Scenario(
        name="left_turn",
        road=road,
        ego=ego,
        vehicles=[from_right, from_left],
        duration=22.0,
        seed=seed,
        config_overrides={"idm": {"v_target": 13.89}, "conflict_half_width": 6.5},
    )


def scenario_emergency(seed: int = 0, distance_factor: float = 1.2) -> Scenario:
    """Stationary obstacle at a multiple of the kinematic braking distance.

    At 1.2x the ego stops short; at 0.8x the longitudinal emergency problem
    is infeasible and the lateral evasion is attempted.
    """
    v0 = 15.0
    a_min = 8.0
    braking = v0**2 / (2.0 * a_min)
    gap = distance_factor * braking
    main = Lane.build(
        "main", [[0.0, 0.0], [250.0, 0.0]], width=3.5, speed_limit=16.7,
    )
    road = RoadMap([main])
    ego_s0 = 20.0
    obstacle_s = ego_s0 + 4.5 / 2.0 + gap + 4.5 / 2.0
    ego = ScenarioVehicle("ego", "main", s0=ego_s0, v0=v0, route=["main"])
    obstacle = ScenarioVehicle(
        "obstacle", "main", s0=obstacle_s, v0=0.0, route=["main"],
        v_target=0.1, stationary=True,
    )
    return Scenario(
        name="emergency",
        road=road,
        ego=ego,
        vehicles=[obstacle],
        duration=8.0,
        seed=seed,
        config_overrides={"idm": {"v_target": 16.7}, "a_min": -a_min},
    )


BUILTIN = {
    "lane_change": scenario_lane_change,
    "roundabout": scenario_roundabout,
    "left_turn": scenario_left_turn,
    "emergency": scenario_emergency,
}
