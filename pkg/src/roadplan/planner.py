"""One full planning cycle.

Each cycle runs the situation assessment, steps the mode state machine,
produces the mode's behavior trajectory (longitudinal traffic, lane change
rollout, or the emergency QPs), assembles the five constraint families,
and solves the central optimization. Every trajectory handed to the
vehicle is a solution of that central problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import behavior as bhv
from . import decision as dcs
from . import emergency as emg
from .config import PlannerConfig
from .drivers import LeaderObservation
from .lane_change import SingleTrackParams, SingleTrackState, generate_lane_change
from .optimizer import (
    ConstraintSet,
    CostWeights,
    ObstaclePrediction,
    SolveReport,
    polygons_overlap,
    prediction_polygons,
    solve,
)
from .road import Polyline, RoadMap, Route, VehicleState


@dataclass
class PlanResult:
    points: np.ndarray
    behavior: bhv.BehaviorTrajectory
    constraints: ConstraintSet
    report: SolveReport
    mode: str
    maneuver: str
    emergency_lon_infeasible: bool = False
    emergency_lat_attempted: bool = False
    emergency_lat_ok: bool = False
    skipped_vehicles: list[str] = field(default_factory=list)


class Planner:
    """Holds the road, the configuration, and the mode state across cycles."""

    def __init__(self, road: RoadMap, ego_route_ids, config: PlannerConfig):
        self.road = road
        self.config = config
        self.fsm = dcs.PlannerState()
        self.route: Route = road.route(ego_route_ids)
        self._st_params = SingleTrackParams(
            l_f=config.wheelbase_front,
            l_r=config.wheelbase_rear,
            delta_max=config.delta_max,
            lookahead_gain=config.lookahead_gain,
            lookahead_min=config.lookahead_min,
        )

    # ------------------------------------------------------------------

    def plan(
        self, ego: VehicleState, others: dict[str, VehicleState], t: float
    ) -> PlanResult:
        cfg = self.config
        skipped: list[str] = []
        hypotheses = bhv.predict_hypotheses(self.road, others, cfg, skipped=skipped)

        s_ego, d_ego, _ = self.route.centerline.project(ego.position)
        leader_hyp = bhv.find_leader(s_ego, self.route, hypotheses)
        leader_obs = self._leader_observation(s_ego, ego, leader_hyp)

        flags = self._assess(ego, s_ego, d_ego, leader_obs, others, t)
        prev_mode = self.fsm.mode
        self.fsm = dcs.step_fsm(self.fsm, flags, t, dwell=cfg.emergency_dwell)
        if self.fsm.mode == dcs.LANE_CHANGE and self.fsm.lc_target is None:
            self._bind_lane_change_target(ego)
        if self.fsm.mode == dcs.LANE_CHANGE and self.fsm.lc_target is None:
            # no adjacent lane resolvable: stay longitudinal
            self.fsm = dcs.PlannerState(mode=dcs.LTM, mode_entry_time=t)
        if prev_mode == dcs.LANE_CHANGE and self.fsm.mode == dcs.LTM:
            self._retarget_route_after_lane_change(ego)
            s_ego, d_ego, _ = self.route.centerline.project(ego.position)
            leader_hyp = bhv.find_leader(s_ego, self.route, hypotheses)

        if self.fsm.mode == dcs.EMERGENCY:
            result = self._plan_emergency(ego, s_ego, leader_obs, hypotheses)
        elif self.fsm.mode == dcs.LANE_CHANGE:
            result = self._plan_lane_change(ego, others, hypotheses)
        else:
            result = self._plan_ltm(ego, s_ego, leader_hyp, hypotheses)
        result.skipped_vehicles = skipped
        return result

    # ------------------------------------------------------------------
    # situation assessment

    def _leader_observation(
        self, s_ego: float, ego: VehicleState, leader_hyp
    ) -> Optional[LeaderObservation]:
        if leader_hyp is None:
            return None
        s_lead, _, _ = self.route.centerline.project(leader_hyp.points[0])
        gap = s_lead - s_ego - (leader_hyp.length + self.config.ego_length) / 2.0
        if gap <= 0.0:
            # a merging vehicle can project to a non-positive arc gap while
            # the bodies are laterally apart; only genuine overlap counts
            other = VehicleState(
                x=leader_hyp.points[0][0],
                y=leader_hyp.points[0][1],
                heading=float(leader_hyp.heading[0]),
                v=float(leader_hyp.v[0]),
                length=leader_hyp.length,
                width=leader_hyp.width,
            )
            if not polygons_overlap(ego.footprint(), other.footprint()):
                gap = max(gap, 0.05)
        return LeaderObservation(
            gap=gap, dv=ego.v - leader_hyp.v[0], leader_accel=leader_hyp.a[0]
        )

    def _current_lane_id(self, ego: VehicleState) -> Optional[str]:
        match = self.road.match(ego.position, ego.heading)
        return match[0] if match is not None else None

    def _lane_actors(self, lane_id: str, others: dict[str, VehicleState]):
        lane = self.road.lane(lane_id)
        actors = []
        for vid in sorted(others):
            state = others[vid]
            s, _, _ = lane.centerline.project(state.position)
            if bhv._on_path(lane.centerline, state.position)[0]:
                actors.append(
                    dcs.LaneActor(s=s, v=state.v, accel=state.accel, length=state.length)
                )
        return actors

    def _assess(self, ego, s_ego, d_ego, leader_obs, others, t) -> dcs.SituationFlags:
        cfg = self.config
        flags = dcs.SituationFlags()
        flags.critical = dcs.criticality(leader_obs, cfg.a_critical)
        if (
            self.fsm.mode == dcs.EMERGENCY
            and leader_obs is not None
            and ego.v > 0.3
        ):
            # hold the emergency until the stop has actually resolved:
            # the closing-speed check clears while still braking hard
            required = ego.v**2 / (2.0 * max(leader_obs.gap - 0.3, 0.05))
            if required > cfg.a_lon_comf:
                flags.critical = True
        flags.structural_gate = dcs.structural_gate(
            self.route, s_ego, cfg.gate_lookahead, cfg.kappa_gate
        )

        lane_id = self._current_lane_id(ego)
        if lane_id is not None and self.fsm.mode == dcs.LTM:
            lane = self.road.lane(lane_id)
            s_on_lane, _, _ = lane.centerline.project(ego.position)
            current_actors = self._lane_actors(lane_id, others)
            ego_actor = dcs.LaneActor(
                s=s_on_lane, v=ego.v, accel=ego.accel, length=cfg.ego_length
            )
            for side, neighbor in (
                ("left", lane.left_neighbor),
                ("right", lane.right_neighbor),
            ):
                if neighbor is None or neighbor not in self.road.lanes:
                    continue
                cand_lane = self.road.lane(neighbor)
                s_cand, _, _ = cand_lane.centerline.project(ego.position)
                cand_actors = self._lane_actors(neighbor, others)
                cand_ego = dcs.LaneActor(
                    s=s_cand, v=ego.v, accel=ego.accel, length=cfg.ego_length
                )
                ok, _ = dcs.mobil_incentive(
                    cand_ego,
                    current_actors,
                    cand_actors,
                    cfg.idm.with_v_target(cand_lane.speed_limit),
                    politeness=cfg.mobil_politeness,
                    a_threshold=cfg.mobil_a_threshold,
                    bias=cfg.mobil_bias,
                )
                safe = dcs.lane_change_safety(
                    cand_ego, cand_actors, cfg.idm, b_safe=cfg.mobil_b_safe
                )
                if side == "left":
                    flags.incentive_left, flags.safe_left = ok, safe
                else:
                    flags.incentive_right, flags.safe_right = ok, safe

        if self.fsm.mode == dcs.LANE_CHANGE and self.fsm.lc_target is not None:
            target = self.road.lane(self.fsm.lc_target)
            s_t, d_t, _ = target.centerline.project(ego.position)
            heading_err = _angle_diff(ego.heading, target.centerline.heading_at(s_t))
            flags.lane_change_complete = (
                abs(d_t) < cfg.lc_complete_offset
                and abs(heading_err) < cfg.lc_complete_heading
            )
            ego_actor = dcs.LaneActor(
                s=s_t, v=ego.v, accel=ego.accel, length=cfg.ego_length
            )
            flags.lane_change_still_safe = dcs.lane_change_safety(
                ego_actor,
                self._lane_actors(self.fsm.lc_target, others),
                cfg.idm,
                b_safe=cfg.mobil_b_safe,
            )
        return flags

    def _bind_lane_change_target(self, ego: VehicleState) -> None:
        lane_id = self._current_lane_id(ego)
        if lane_id is None:
            return
        lane = self.road.lane(lane_id)
        target = lane.left_neighbor if self.fsm.lc_side == "left" else lane.right_neighbor
        if target is None or target not in self.road.lanes:
            self.fsm.lc_side = None
            return
        self.fsm.lc_target = target
        self.fsm.lc_source = lane_id

    def _retarget_route_after_lane_change(self, ego: VehicleState) -> None:
        lane_id = self._current_lane_id(ego)
        if lane_id is None:
            return
        reach = max(200.0, self.config.sim_v_max * self.config.horizon * 4)
        options = self.road.route_options(lane_id, reach)
        self.route = self.road.route(options[0])

    # ------------------------------------------------------------------
    # mode planners

    def _weights(self) -> CostWeights:
        cfg = self.config
        return CostWeights(w_b=cfg.w_b, w_a=cfg.w_a, w_j=cfg.w_j, w_s=cfg.w_s)

    def _pins(self, ego: VehicleState) -> np.ndarray:
        step = ego.v * self.config.dt
        direction = np.array([np.cos(ego.heading), np.sin(ego.heading)])
        return np.vstack((ego.position, ego.position + step * direction))

    def _obstacles(
        self, hypotheses, ego: VehicleState, extra_ids=()
    ) -> list[ObstaclePrediction]:
        cfg = self.config
        cull = cfg.obstacle_cull_factor * cfg.horizon * cfg.sim_v_max
        out = []
        for hyp in bhv._best_per_vehicle(hypotheses):
            dist = np.hypot(*(hyp.points[0] - ego.position))
            if dist > cull and hyp.vehicle_id not in extra_ids:
                continue
            # the rear wedge pushes the ego around a moving leader; a
            # standing obstacle needs exact clearance so it gets none, and
            # collision constraints must not assume it drives away
            if hyp.v[0] < 0.3:
                poses = np.column_stack(
                    (np.tile(hyp.points[0], (len(hyp.points), 1)),
                     np.full(len(hyp.points), hyp.heading[0]))
                )
                tri = 0.0
            else:
                poses = np.column_stack((hyp.points, hyp.heading))
                tri = cfg.rear_triangle_length
            polys = prediction_polygons(
                poses, hyp.length, hyp.width, cfg.ego_radius, tri
            )
            out.append(ObstaclePrediction(hyp.vehicle_id, polys))
        return out

    def _solve(
        self,
        behavior_traj: bhv.BehaviorTrajectory,
        constraints: ConstraintSet,
        ego: VehicleState,
        mode: str,
        extra: Optional[dict] = None,
        weights: Optional[CostWeights] = None,
    ) -> PlanResult:
        cfg = self.config
        diag = [] if cfg.dump_solver_csv else None
        points, report = solve(
            behavior_traj.points,
            constraints,
            weights if weights is not None else self._weights(),
            cfg.dt,
            pinned=self._pins(ego),
            tol_h=cfg.tol_h,
            tol_g=cfg.tol_g,
            max_outer=cfg.max_outer_iter,
            max_inner=cfg.max_inner_iter,
            diag_rows=diag,
        )
        result = PlanResult(
            points=points,
            behavior=behavior_traj,
            constraints=constraints,
            report=report,
            mode=mode,
            maneuver=behavior_traj.maneuver,
        )
        if extra:
            for key, value in extra.items():
                setattr(result, key, value)
        if diag is not None:
            result.solver_diag = diag
        return result

    def _window(self, route: Route, s_ego: float, v: float):
        """Constraint geometry clipped to the reachable planning window."""
        lo = s_ego - 15.0
        hi = s_ego + max(v, 5.0) * self.config.horizon * 1.5 + 30.0
        path, offset = route.centerline.slice(lo, hi)
        pos_lo = route.centerline.point_at(max(lo, 0.0))
        pos_hi = route.centerline.point_at(min(hi, route.length))
        s_l0, _, _ = route.boundary_left.project(pos_lo)
        s_l1, _, _ = route.boundary_left.project(pos_hi)
        left, _ = route.boundary_left.slice(s_l0 - 5.0, s_l1 + 5.0)
        s_r0, _, _ = route.boundary_right.project(pos_lo)
        s_r1, _, _ = route.boundary_right.project(pos_hi)
        right, _ = route.boundary_right.slice(s_r0 - 5.0, s_r1 + 5.0)
        return path, offset, left, right

    def _plan_ltm(self, ego, s_ego, leader_hyp, hypotheses) -> PlanResult:
        cfg = self.config
        profile = self.road.profile(self.route, cfg.a_lat_max, cfg.a_lon_comf)
        conflicts = bhv.find_conflicts(self.road, self.route, s_ego, hypotheses, cfg)
        candidates = bhv.generate_candidates(
            s_ego, ego.v, self.route, profile.value, leader_hyp, conflicts, cfg
        )
        chosen, corridor = bhv.select_behavior(
            candidates, hypotheses, conflicts, self.route, cfg
        )
        path, offset, left, right = self._window(self.route, s_ego, ego.v)
        constraints = ConstraintSet(
            boundary_left=left,
            boundary_right=right,
            obstacles=self._obstacles(hypotheses, ego),
            corridor=(corridor.s_min - offset, corridor.s_max - offset),
            path=path,
            a_max=cfg.a_max,
            radius=cfg.ego_radius,
        )
        return self._solve(chosen, constraints, ego, dcs.LTM)

    def _plan_lane_change(self, ego, others, hypotheses) -> PlanResult:
        cfg = self.config
        target_lane = self.road.lane(self.fsm.lc_target)
        reach = max(150.0, ego.v * cfg.horizon * 3)
        target_route = self.road.route(
            self.road.route_options(target_lane.lane_id, reach)[0]
        )
        profile = self.road.profile(target_route, cfg.a_lat_max, cfg.a_lon_comf)

        # leader on the target route, projected along it
        target_leader = bhv.find_leader(
            target_route.centerline.project(ego.position)[0], target_route, hypotheses
        )
        leader_kwargs = {}
        if target_leader is not None:
            s_l, _, _ = target_route.centerline.project(target_leader.points[0])
            leader_kwargs = dict(
                leader_s0=s_l,
                leader_v=float(target_leader.v[0]),
                leader_length=target_leader.length,
            )
        state = SingleTrackState(x=ego.x, y=ego.y, theta=ego.heading, v=ego.v)
        rollout = generate_lane_change(
            state,
            target_route.centerline,
            self._st_params,
            cfg.idm,
            cfg.dt,
            cfg.n_points,
            ego_length=cfg.ego_length,
            v_target_fn=profile.value,
            **leader_kwargs,
        )
        behavior_traj = bhv.BehaviorTrajectory(
            points=rollout.points,
            s=rollout.s,
            v=rollout.v,
            a=rollout.a,
            maneuver="lane_change",
        )
        source_lane = (
            self.road.lane(self.fsm.lc_source)
            if self.fsm.lc_source in self.road.lanes
            else target_lane
        )
        s_on_target, _, _ = target_route.centerline.project(ego.position)
        path, offset, _, _ = self._window(target_route, s_on_target, ego.v)
        lo_w = s_on_target - 15.0
        hi_w = s_on_target + max(ego.v, 5.0) * cfg.horizon * 1.5 + 30.0
        if self.fsm.lc_side == "left":
            boundary_left = _window_lane_boundary(target_lane, "left", lo_w, hi_w)
            boundary_right = _window_lane_boundary(source_lane, "right", lo_w, hi_w)
        else:
            boundary_left = _window_lane_boundary(source_lane, "left", lo_w, hi_w)
            boundary_right = _window_lane_boundary(target_lane, "right", lo_w, hi_w)
        corridor_max = np.minimum(
            rollout.s + cfg.corridor_slack, target_route.length
        ) - offset
        constraints = ConstraintSet(
            boundary_left=boundary_left,
            boundary_right=boundary_right,
            obstacles=self._obstacles(hypotheses, ego),
            corridor=(np.zeros(cfg.n_points), corridor_max),
            path=path,
            a_max=cfg.a_max,
            radius=cfg.ego_radius,
        )
        return self._solve(behavior_traj, constraints, ego, dcs.LANE_CHANGE)

    def _plan_emergency(self, ego, s_ego, leader_obs, hypotheses) -> PlanResult:
        cfg = self.config
        gap = leader_obs.gap if leader_obs is not None else np.inf
        gap = min(gap, self.route.length - s_ego)
        lon_infeasible = False
        lat_attempted = False
        lat_ok = False
        lat = None
        lon = None

        def lon_with(stop):
            return emg.solve_emergency_lon(
                emg.LonParams(
                    v0=ego.v,
                    a0=ego.accel,
                    a_min=cfg.a_min,
                    s_stop=stop,
                    dt=cfg.dt,
                    n=cfg.n_points,
                    w_v_terminal=cfg.w_v_terminal,
                )
            )

        # preferred clearance first; in the terminal phase the comfortable
        # buffer may be unreachable while the obstacle itself still is, so
        # the clearance relaxes before infeasibility is declared
        min_clear = max(0.3, 2.0 * cfg.ego_radius - cfg.ego_length / 2.0 + 0.15)
        for clearance in (cfg.emergency_clearance, min_clear):
            try:
                lon = lon_with(max(gap - clearance, 0.02))
                break
            except emg.Infeasible:
                continue
        if lon is None:
            lon_infeasible = True
            # pure-braking fallback: relax the stop bound to the kinematic
            # braking distance and attempt the lateral evasion around it
            relaxed = ego.v**2 / (2.0 * abs(cfg.a_min)) + ego.v * cfg.dt + 0.5
            lon = lon_with(relaxed)
            lat_attempted = True
            try:
                lat = emg.solve_emergency_lat(
                    self._evasion_corridor(s_ego, lon, hypotheses, gap), lon
                )
                lat_ok = True
            except emg.Infeasible:
                lat = None
        if lat is None:
            lat = np.zeros(cfg.n_points)
        points = emg.assemble_emergency_trajectory(
            lon, lat, self.route.centerline, s_offset=s_ego
        )
        behavior_traj = bhv.BehaviorTrajectory(
            points=points,
            s=s_ego + lon.s,
            v=lon.v,
            a=lon.a,
            maneuver="emergency",
        )
        path, offset, left, right = self._window(self.route, s_ego, ego.v)
        # the stop distance is a hard spatio-temporal bound: the smoothing
        # must not round the stop corner past the clearance
        stop_bound = s_ego + max(gap - min_clear, 0.02)
        corridor_hi = np.minimum(
            np.minimum(behavior_traj.s + cfg.corridor_slack, self.route.length),
            stop_bound,
        )
        constraints = ConstraintSet(
            boundary_left=left,
            boundary_right=right,
            obstacles=self._obstacles(hypotheses, ego),
            corridor=(np.zeros(cfg.n_points), corridor_hi - offset),
            path=path,
            a_max=cfg.a_max_emergency,
            radius=cfg.ego_radius,
        )
        emergency_weights = CostWeights(
            w_b=cfg.w_b_emergency, w_a=cfg.w_a, w_j=cfg.w_j, w_s=cfg.w_s
        )
        return self._solve(
            behavior_traj,
            constraints,
            ego,
            dcs.EMERGENCY,
            extra=dict(
                emergency_lon_infeasible=lon_infeasible,
                emergency_lat_attempted=lat_attempted,
                emergency_lat_ok=lat_ok,
            ),
            weights=emergency_weights,
        )

    def _evasion_corridor(self, s_ego, lon: emg.LonTrace, hypotheses, gap) -> emg.LatParams:
        """Lateral corridor around the braking profile.

        Free space spans the current lane plus, when present, its left
        neighbor; steps whose arc range overlaps the blocking obstacle must
        clear it on the wider side.
        """
        cfg = self.config
        n = len(lon.s)
        lane = self.route.lane_at(s_ego)
        half = 1.75 - cfg.ego_radius * 0.5
        d_min = np.full(n, -half)
        d_max = np.full(n, half)
        if lane.left_neighbor in self.road.lanes:
            d_max += 3.5
        blocked = lon.s >= max(gap - cfg.ego_length, 0.0)
        d_min[blocked] = np.maximum(
            d_min[blocked], 1.9 / 2.0 + cfg.ego_radius + 0.2
        )
        return emg.LatParams(
            d_min=d_min,
            d_max=d_max,
            a_lat_max=cfg.a_lat_max_emergency,
            dt=cfg.dt,
            w_d_offset=cfg.w_d_offset,
        )


def _window_lane_boundary(lane, side: str, s_lo: float, s_hi: float) -> Polyline:
    boundary = lane.boundary_left if side == "left" else lane.boundary_right
    ratio = boundary.length / max(lane.centerline.length, 1e-9)
    piece, _ = boundary.slice(s_lo * ratio, s_hi * ratio)
    return piece


def _angle_diff(a: float, b: float) -> float:
    return float(np.arctan2(np.sin(a - b), np.cos(a - b)))
