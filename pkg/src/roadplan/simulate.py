"""Deterministic fixed-step closed-loop simulation.

The ego replans with the full stack every other tick and tracks its plan
perfectly; other vehicles follow their scripted routes with the plain
driver model, reacting to whoever is physically ahead of them (including
the ego). Logs one CSV row per tick plus a status trailer.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .behavior import OCCUPANCY_HALF_WIDTH
from .config import PlannerConfig
from .drivers import IdmParams, LeaderObservation, idm_accel
from .optimizer import fd_matrix, polygons_overlap
from .planner import Planner
from .road import RoadMap, Route, VehicleState


@dataclass
class ScenarioVehicle:
    vehicle_id: str
    lane_id: str
    s0: float
    v0: float
    route: list[str] = field(default_factory=list)
    length: float = 4.5
    width: float = 1.9
    v_target: Optional[float] = None  # overrides the lane speed limit
    stationary: bool = False  # parked obstacle: never moves


@dataclass
class Scenario:
    name: str
    road: RoadMap
    ego: ScenarioVehicle
    vehicles: list[ScenarioVehicle]
    duration: float
    seed: int = 0
    config_overrides: dict = field(default_factory=dict)

    def validate(self) -> list[str]:
        """Geometric and referential sanity problems, empty when clean."""
        problems = []
        lanes = self.road.lanes
        for sv in [self.ego] + self.vehicles:
            route = sv.route or [sv.lane_id]
            for lane_id in route:
                if lane_id not in lanes:
                    problems.append(f"vehicle {sv.vehicle_id}: unknown lane {lane_id}")
            for a, b in zip(route[:-1], route[1:]):
                if a in lanes and b not in lanes[a].successors:
                    problems.append(
                        f"vehicle {sv.vehicle_id}: {b} is not a successor of {a}"
                    )
            if sv.lane_id in lanes and sv.s0 > lanes[sv.lane_id].centerline.length:
                problems.append(f"vehicle {sv.vehicle_id}: s0 beyond lane end")
        for lane in lanes.values():
            if not lane.boundary_sides_consistent():
                problems.append(f"lane {lane.lane_id}: boundaries on wrong sides")
        for c in self.road.conflicts:
            for lane_id, s in ((c.lane_a, c.s_a), (c.lane_b, c.s_b)):
                if lane_id not in lanes:
                    problems.append(f"conflict references unknown lane {lane_id}")
                # small tolerance: resampling on load can shorten a polyline
                # by a fraction of a millimeter
                elif not -1e-3 <= s <= lanes[lane_id].centerline.length + 1e-3:
                    problems.append(f"conflict point outside lane {lane_id}")
        if self.duration <= 0.0:
            problems.append("duration must be positive")
        return problems


@dataclass
class SimLog:
    columns: list[str]
    rows: list[list]
    status: str  # OK | FAILED
    vehicle_ids: list[str]

    def column(self, name: str) -> np.ndarray:
        idx = self.columns.index(name)
        return np.array([row[idx] for row in self.rows], dtype=float)

    def text_column(self, name: str) -> list[str]:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            cells = []
            for value in row:
                if isinstance(value, str):
                    cells.append(value)
                else:
                    cells.append(f"{float(value):.9g}")
            buf.write(",".join(cells) + "\n")
        buf.write(f"STATUS,{self.status}\n")
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "SimLog":
        lines = [ln for ln in text.strip().splitlines() if ln]
        columns = lines[0].split(",")
        status = "OK"
        rows = []
        for ln in lines[1:]:
            if ln.startswith("STATUS,"):
                status = ln.split(",", 1)[1]
                continue
            cells = ln.split(",")
            row = []
            for name, cell in zip(columns, cells):
                if name in ("mode", "maneuver"):
                    row.append(cell)
                else:
                    row.append(float(cell))
            rows.append(row)
        ids = []
        for name in columns:
            if name.endswith("_x") and name not in ("ego_x",):
                ids.append(name[:-2])
        return SimLog(columns=columns, rows=rows, status=status, vehicle_ids=ids)


class _TrafficAgent:
    """A scripted vehicle advancing with the driver model along its route."""

    def __init__(self, sv: ScenarioVehicle, road: RoadMap, config: PlannerConfig):
        self.spec = sv
        route_ids = sv.route or [sv.lane_id]
        self.route: Route = road.route(route_ids)
        self.s = self.route.lane_offset(sv.lane_id) + sv.s0
        self.v = sv.v0
        self.accel = 0.0
        base = config.idm
        self.params: IdmParams = (
            base.with_v_target(sv.v_target) if sv.v_target else base
        )
        self.profile = road.profile(self.route, config.a_lat_max, config.a_lon_comf)
        self.use_profile = sv.v_target is None

    def state(self) -> VehicleState:
        pos = self.route.centerline.point_at(self.s)
        heading = self.route.centerline.heading_at(self.s)
        return VehicleState(
            x=pos[0], y=pos[1], heading=heading, v=self.v, accel=self.accel,
            length=self.spec.length, width=self.spec.width,
        )

    def leader_among(self, entities) -> Optional[LeaderObservation]:
        """Nearest entity physically ahead on this agent's route."""
        best = None
        line = self.route.centerline
        for pos, v, accel, length in entities:
            s, _, _ = line.project(pos)
            if float(line.distance_many(pos[None, :])[0]) >= OCCUPANCY_HALF_WIDTH:
                continue
            if s <= self.s:
                continue
            gap = s - self.s - (length + self.spec.length) / 2.0
            if best is None or gap < best.gap:
                best = LeaderObservation(gap=max(gap, 1e-3), dv=self.v - v, leader_accel=accel)
        return best

    def step(self, dt: float, entities) -> None:
        if self.spec.stationary:
            self.v = 0.0
            self.accel = 0.0
            return
        params = self.params
        if self.use_profile:
            params = params.with_v_target(self.profile.value(self.s))
        leader = self.leader_among(entities)
        a = idm_accel(self.v, leader, params)
        v_next = max(0.0, self.v + a * dt)
        self.s = min(self.s + 0.5 * (self.v + v_next) * dt, self.route.length)
        self.v = v_next
        self.accel = a


def run(
    scenario: Scenario,
    config: Optional[PlannerConfig] = None,
    plan_recorder: Optional[list] = None,
) -> SimLog:
    """Simulate a scenario closed loop; deterministic for a fixed seed.

    ``plan_recorder`` collects every planning result (accepted or not) for
    offline verification.
    """
    cfg = (config or PlannerConfig()).merged(scenario.config_overrides)
    road = scenario.road
    planner = Planner(road, scenario.ego.route or [scenario.ego.lane_id], cfg)

    ego_route = planner.route
    ego_s0 = ego_route.lane_offset(scenario.ego.lane_id) + scenario.ego.s0
    pos0 = ego_route.centerline.point_at(ego_s0)
    ego = VehicleState(
        x=pos0[0], y=pos0[1],
        heading=ego_route.centerline.heading_at(ego_s0),
        v=scenario.ego.v0, accel=0.0,
        length=cfg.ego_length, width=cfg.ego_width,
    )
    agents = [_TrafficAgent(sv, road, cfg) for sv in scenario.vehicles]

    D2 = fd_matrix(cfg.n_points, cfg.dt, 2)

    ticks = int(round(scenario.duration / cfg.dt))
    columns = [
        "t", "mode", "maneuver", "ego_x", "ego_y", "ego_heading", "ego_v",
        "ego_a_lon", "ego_a_lat", "ego_steer", "cost", "max_violation",
        "min_gap", "collision", "em_lon_infeasible", "em_lat_attempted",
        "ego_length", "ego_width",
    ]
    for agent in agents:
        vid = agent.spec.vehicle_id
        columns += [f"{vid}_x", f"{vid}_y", f"{vid}_heading", f"{vid}_v",
                    f"{vid}_length", f"{vid}_width"]

    rows: list[list] = []
    status = "OK"
    plan = None
    plan_tick = 0
    infeasible_streak = 0
    failed = False
    brake_profile = None
    a_lon = a_lat = steer = 0.0
    last_em_lon = last_em_lat = 0.0

    for tick in range(ticks):
        t = tick * cfg.dt

        if tick > 0:
            # advance the world one step: agents react to the previous-tick
            # ego pose, then the ego tracks its plan perfectly
            states_now = {a.spec.vehicle_id: a.state() for a in agents}
            entities_base = [
                (np.array([ego.x, ego.y]), ego.v, ego.accel, ego.length)
            ]
            for agent in agents:
                entities = list(entities_base)
                for other in agents:
                    if other is agent:
                        continue
                    st = states_now[other.spec.vehicle_id]
                    entities.append(
                        (np.array([st.x, st.y]), st.v, st.accel, st.length)
                    )
                agent.step(cfg.dt, entities)
            if failed:
                ego = brake_profile.step(ego)
                a_lon = -abs(cfg.a_min) if ego.v > 0 else 0.0
                a_lat = steer = 0.0
            else:
                ego, a_lon, a_lat, steer = _ego_from_plan(
                    plan.points, tick - plan_tick, cfg, D2, ego
                )

        others = {a.spec.vehicle_id: a.state() for a in agents}

        if not failed and tick % cfg.replan_every == 0:
            result = planner.plan(ego, others, t)
            if plan_recorder is not None:
                plan_recorder.append(result)
            # emergency diagnostics survive even when the attempt is rejected
            last_em_lon = 1.0 if result.emergency_lon_infeasible else 0.0
            last_em_lat = 1.0 if result.emergency_lat_attempted else 0.0
            if result.report.status == "infeasible":
                infeasible_streak += 1
                if infeasible_streak >= 2 or plan is None:
                    failed = True
                    status = "FAILED"
                    brake_profile = _BrakeAlongPlan(
                        plan.points if plan is not None else result.points,
                        tick - plan_tick if plan is not None else 0,
                        ego.v, cfg,
                    )
            else:
                infeasible_streak = 0
                plan = result
                plan_tick = tick

        if failed:
            mode, maneuver, cost_val, viol = "failed", "brake", 0.0, 0.0
            em_lon, em_lat = last_em_lon, last_em_lat
        else:
            if tick == 0:
                ego, a_lon, a_lat, steer = _ego_from_plan(plan.points, 0, cfg, D2, ego)
            mode = plan.mode
            maneuver = plan.maneuver
            cost_val = plan.report.cost
            viol = plan.report.max_violation
            em_lon = 1.0 if plan.emergency_lon_infeasible else 0.0
            em_lat = 1.0 if plan.emergency_lat_attempted else 0.0

        ego_poly = ego.footprint()
        min_gap = np.inf
        collision = 0.0
        for agent in agents:
            other_poly = agent.state().footprint()
            if polygons_overlap(ego_poly, other_poly):
                collision = 1.0
                min_gap = 0.0
            else:
                min_gap = min(min_gap, _polygon_distance(ego_poly, other_poly))
        if not agents:
            min_gap = -1.0  # sentinel: no other vehicles

        row = [
            t, mode, maneuver, ego.x, ego.y, ego.heading, ego.v,
            a_lon, a_lat, steer, cost_val, viol, min_gap, collision,
            em_lon, em_lat, ego.length, ego.width,
        ]
        for agent in agents:
            st = agent.state()
            row += [st.x, st.y, st.heading, st.v, st.length, st.width]
        rows.append(row)

    return SimLog(
        columns=columns,
        rows=rows,
        status=status,
        vehicle_ids=[a.spec.vehicle_id for a in agents],
    )


def _ego_from_plan(points: np.ndarray, idx: int, cfg: PlannerConfig, D2, prev: VehicleState):
    """Perfect tracking: read pose and derivatives off the plan."""
    n = len(points)
    idx = min(idx, n - 2)
    pos = points[idx]
    vel = (points[min(idx + 1, n - 1)] - points[idx]) / cfg.dt
    speed = float(np.hypot(*vel))
    heading = float(np.arctan2(vel[1], vel[0])) if speed > 1e-4 else prev.heading
    acc = (D2 @ points)[idx]
    tangent = (
        vel / speed if speed > 1e-4 else np.array([np.cos(heading), np.sin(heading)])
    )
    a_lon = float(acc @ tangent)
    a_lat = float(tangent[0] * acc[1] - tangent[1] * acc[0])
    kappa = a_lat / speed**2 if speed > 0.5 else 0.0
    steer = float(np.arctan(cfg.wheelbase * kappa))
    state = VehicleState(
        x=pos[0], y=pos[1], heading=heading, v=speed, accel=a_lon,
        length=cfg.ego_length, width=cfg.ego_width,
    )
    return state, a_lon, a_lat, steer


class _BrakeAlongPlan:
    """Advance along the last feasible plan's path while braking hard."""

    def __init__(self, points: np.ndarray, start_idx: int, v: float, cfg: PlannerConfig):
        from .road import Polyline

        self.path = Polyline(_dedupe(points))
        self.s, _, _ = self.path.project(points[min(start_idx, len(points) - 1)])
        self.v = v
        self.cfg = cfg

    def step(self, ego: VehicleState) -> VehicleState:
        dt = self.cfg.dt
        v_next = max(0.0, self.v - abs(self.cfg.a_min) * dt)
        self.s = min(self.s + 0.5 * (self.v + v_next) * dt, self.path.length)
        self.v = v_next
        pos = self.path.point_at(self.s)
        heading = self.path.heading_at(self.s)
        return replace(ego, x=pos[0], y=pos[1], heading=heading, v=self.v,
                       accel=-abs(self.cfg.a_min) if self.v > 0 else 0.0)


def _dedupe(points: np.ndarray) -> np.ndarray:
    keep = [points[0]]
    for p in points[1:]:
        if np.hypot(*(p - keep[-1])) > 1e-9:
            keep.append(p)
    if len(keep) < 2:
        keep.append(keep[-1] + np.array([1e-6, 0.0]))
    return np.asarray(keep)


def _polygon_distance(poly_a: np.ndarray, poly_b: np.ndarray) -> float:
    """Distance between disjoint convex polygons (vertex-to-edge both ways)."""
    def one_way(A, B):
        E = np.roll(B, -1, axis=0) - B
        elen2 = np.einsum("ki,ki->k", E, E)
        rel = A[:, None, :] - B[None, :, :]
        tt = np.clip(np.einsum("mki,ki->mk", rel, E) / elen2, 0.0, 1.0)
        foot = B[None, :, :] + tt[..., None] * E[None, :, :]
        delta = A[:, None, :] - foot
        return float(np.sqrt(np.einsum("mki,mki->mk", delta, delta).min()))

    return min(one_way(poly_a, poly_b), one_way(poly_b, poly_a))


# ----------------------------------------------------------------------
# metrics


def metrics(log: SimLog) -> dict:
    """Summary statistics recomputed purely from the log contents."""
    if not log.rows:
        raise ValueError("empty log")
    t = log.column("t")
    dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
    a_lon = log.column("ego_a_lon")
    a_lat = log.column("ego_a_lat")
    jerk = np.abs(np.diff(a_lon)) / dt if len(a_lon) > 1 else np.zeros(1)
    gaps = log.column("min_gap")
    valid_gaps = gaps[gaps >= 0.0]
    modes = log.text_column("mode")
    timeline = []
    for ti, mode in zip(t, modes):
        if not timeline or timeline[-1][1] != mode:
            timeline.append((float(ti), mode))
    return {
        "status": log.status,
        "max_abs_a_lon": float(np.abs(a_lon).max()),
        "max_abs_a_lat": float(np.abs(a_lat).max()),
        "max_abs_jerk": float(jerk.max()),
        "min_gap": float(valid_gaps.min()) if valid_gaps.size else None,
        "collision": bool(log.column("collision").max() > 0.0),
        "mode_timeline": timeline,
        "final_speed": float(log.column("ego_v")[-1]),
        "final_position": [
            float(log.column("ego_x")[-1]),
            float(log.column("ego_y")[-1]),
        ],
        "duration": float(t[-1] + dt),
        "emergency_lon_infeasible": bool(log.column("em_lon_infeasible").max() > 0.0),
        "emergency_lat_attempted": bool(log.column("em_lat_attempted").max() > 0.0),
    }


def final_lane(log: SimLog, road: RoadMap) -> Optional[str]:
    """Lane the ego occupies at the last tick."""
    pos = np.array([log.column("ego_x")[-1], log.column("ego_y")[-1]])
    heading = float(log.column("ego_heading")[-1])
    match = road.match(pos, heading)
    return match[0] if match else None
