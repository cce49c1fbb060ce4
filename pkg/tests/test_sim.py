import numpy as np
import pytest

from roadplan.config import PlannerConfig
from roadplan.planner import Planner
from roadplan.road import Lane, RoadMap, VehicleState
from roadplan.simulate import Scenario, ScenarioVehicle, SimLog, metrics, run


def straight_scenario(duration=3.0, v0=13.89, leader=None):
    lane = Lane.build("a", [[0.0, 0.0], [400.0, 0.0]], width=3.5, speed_limit=13.89)
    vehicles = []
    if leader is not None:
        vehicles.append(
            ScenarioVehicle("lead", "a", s0=leader[0], v0=leader[1], route=["a"],
                            v_target=leader[1])
        )
    return Scenario(
        name="straight",
        road=RoadMap([lane]),
        ego=ScenarioVehicle("ego", "a", s0=10.0, v0=v0, route=["a"]),
        vehicles=vehicles,
        duration=duration,
    )


class TestRun:
    def test_empty_straight_constant_speed(self):
        log = run(straight_scenario())
        assert log.status == "OK"
        v = log.column("ego_v")
        assert np.abs(v - 13.89).max() < 0.05
        assert set(log.text_column("mode")) == {"ltm"}
        m = metrics(log)
        assert m["max_abs_a_lon"] < 0.05
        assert m["max_abs_a_lat"] < 0.01
        assert not m["collision"]

    def test_determinism_byte_identical(self):
        a = run(straight_scenario(duration=2.0, leader=(60.0, 9.0))).to_csv()
        b = run(straight_scenario(duration=2.0, leader=(60.0, 9.0))).to_csv()
        assert a == b

    def test_no_teleportation(self):
        cfg = PlannerConfig()
        log = run(straight_scenario(duration=3.0))
        x = log.column("ego_x")
        y = log.column("ego_y")
        step = np.hypot(np.diff(x), np.diff(y))
        assert step.max() <= (cfg.sim_v_max + 1.0) * cfg.dt

    def test_follow_keeps_gap(self):
        log = run(straight_scenario(duration=4.0, leader=(45.0, 9.0)))
        assert log.column("min_gap").min() > 2.0
        assert not metrics(log)["collision"]

    def test_csv_round_trip(self):
        log = run(straight_scenario(duration=1.0))
        text = log.to_csv()
        assert text.strip().endswith("STATUS,OK")
        back = SimLog.from_csv(text)
        assert back.columns == log.columns
        assert back.status == "OK"
        assert len(back.rows) == len(log.rows)
        assert np.allclose(back.column("ego_x"), log.column("ego_x"))

    def test_floats_formatted_9_significant(self):
        log = run(straight_scenario(duration=0.5))
        line = log.to_csv().splitlines()[1]
        cells = line.split(",")
        t_idx = log.columns.index("ego_x")
        assert len(cells[t_idx].replace(".", "").replace("-", "").lstrip("0")) <= 10


class TestReplanContinuity:
    def test_pinned_point_matches_pose(self):
        lane = Lane.build("a", [[0.0, 0.0], [400.0, 0.0]], width=3.5)
        road = RoadMap([lane])
        cfg = PlannerConfig()
        planner = Planner(road, ["a"], cfg)
        ego = VehicleState(x=10.0, y=0.0, heading=0.0, v=12.0)
        result = planner.plan(ego, {}, 0.0)
        assert np.allclose(result.points[0], ego.position, atol=1e-9)
        # advance two steps along the plan, replan from there
        pose = result.points[2]
        vel = (result.points[3] - result.points[2]) / cfg.dt
        ego2 = VehicleState(
            x=pose[0], y=pose[1],
            heading=float(np.arctan2(vel[1], vel[0])), v=float(np.hypot(*vel)),
        )
        result2 = planner.plan(ego2, {}, 2 * cfg.dt)
        assert np.linalg.norm(result2.points[0] - pose) < 1e-6


class TestMetrics:
    def test_constant_speed_zero_metrics(self):
        log = run(straight_scenario(duration=2.0))
        m = metrics(log)
        assert m["max_abs_a_lon"] < 0.05
        assert not m["collision"]
        assert m["mode_timeline"][0][1] == "ltm"

    def test_collision_flag_on_overlap(self):
        # adversarial: non-moving ego spawned overlapping a parked vehicle
        lane = Lane.build("a", [[0.0, 0.0], [100.0, 0.0]], width=3.5)
        sc = Scenario(
            name="overlap",
            road=RoadMap([lane]),
            ego=ScenarioVehicle("ego", "a", s0=10.0, v0=0.0, route=["a"]),
            vehicles=[
                ScenarioVehicle("block", "a", s0=12.0, v0=0.0, route=["a"],
                                v_target=0.1, stationary=True)
            ],
            duration=0.5,
        )
        log = run(sc)
        assert metrics(log)["collision"]
        assert log.column("min_gap").min() == 0.0

    def test_jerk_matches_analytic_on_scripted_profile(self):
        # scripted quadratic speed profile: v = 2 + 0.5 t^2 -> jerk da/dt = 1
        n = 60
        dt = 0.05
        t = np.arange(n) * dt
        a = 1.0 * t  # accel ramp
        columns = ["t", "mode", "maneuver", "ego_x", "ego_y", "ego_heading",
                   "ego_v", "ego_a_lon", "ego_a_lat", "ego_steer", "cost",
                   "max_violation", "min_gap", "collision", "em_lon_infeasible",
                   "em_lat_attempted", "ego_length", "ego_width"]
        rows = []
        for i in range(n):
            rows.append([t[i], "ltm", "free", 0.0, 0.0, 0.0, 2 + 0.5 * t[i] ** 2,
                         a[i], 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 4.5, 1.9])
        log = SimLog(columns=columns, rows=rows, status="OK", vehicle_ids=[])
        m = metrics(log)
        assert m["max_abs_jerk"] == pytest.approx(1.0, rel=1e-6)


class TestValidate:
    def test_valid_scenario_clean(self):
        assert straight_scenario().validate() == []

    def test_unknown_lane_flagged(self):
        sc = straight_scenario()
        sc.ego.route = ["a", "ghost"]
        problems = sc.validate()
        assert any("ghost" in p for p in problems)

    def test_disconnected_route_flagged(self):
        lane_a = Lane.build("a", [[0, 0], [50, 0]], width=3.5)
        lane_b = Lane.build("b", [[80, 0], [120, 0]], width=3.5)
        sc = Scenario(
            name="x",
            road=RoadMap([lane_a, lane_b]),
            ego=ScenarioVehicle("ego", "a", s0=0.0, v0=5.0, route=["a", "b"]),
            vehicles=[],
            duration=1.0,
        )
        problems = sc.validate()
        assert any("successor" in p for p in problems)
