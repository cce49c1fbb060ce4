"""Behavior-trajectory generation and selection.

Produces candidate longitudinal maneuvers (free driving, following,
yielding via a virtual leader, stopping at a conflict entry), rates them
with a social cost that weighs the ego's progress against the braking it
forces onto others, and derives the spatio-temporal corridor that the
central optimization must respect.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .config import PlannerConfig
from .drivers import IdmParams, LeaderObservation, eidm_accel, idm_accel
from .road import RoadMap, Route, VehicleState

OCCUPANCY_HALF_WIDTH = 1.75  # lateral reach of a vehicle on a path [m]


@dataclass
class BehaviorTrajectory:
    """Reference points anchoring the central cost, one per time step."""

    points: np.ndarray  # (N, 2) world frame
    s: np.ndarray       # arc positions along the generating path
    v: np.ndarray
    a: np.ndarray
    maneuver: str       # free | follow | go_before | yield_to:<id> | stop | ...

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class TrajectoryHypothesis:
    """One predicted future of one other vehicle along one route option."""

    vehicle_id: str
    option: int
    probability: float
    route: Route
    s: np.ndarray
    v: np.ndarray
    a: np.ndarray
    points: np.ndarray
    heading: np.ndarray
    length: float = 4.5
    width: float = 1.9
    v_target_fn: Optional[Callable[[float], float]] = None


@dataclass
class SpatioTemporalCorridor:
    """Per-step arc-length window the optimized trajectory must stay in."""

    s_min: np.ndarray
    s_max: np.ndarray

    def feasible(self) -> bool:
        return bool(np.all(self.s_min <= self.s_max + 1e-9))

    def contains(self, s: np.ndarray, tol: float = 1e-6) -> bool:
        return bool(np.all(s >= self.s_min - tol) and np.all(s <= self.s_max + tol))


@dataclass
class ConflictInfo:
    """A conflicting vehicle hypothesis mapped onto the ego route."""

    vehicle_id: str
    hypothesis: TrajectoryHypothesis
    s_conflict_ego: float
    s_conflict_other: float


def predict_hypotheses(
    road_map: RoadMap,
    vehicles: dict[str, VehicleState],
    config: PlannerConfig,
    skipped: Optional[list[str]] = None,
) -> list[TrajectoryHypothesis]:
    """One hypothesis per reachable route branch of every vehicle.

    Each branch is propagated with the plain driver model against the
    branch's velocity profile; probabilities are uniform over the branches
    of a vehicle. Vehicles that match no lane are skipped (recorded in
    ``skipped`` when given).
    """
    n, dt = config.n_points, config.dt
    out: list[TrajectoryHypothesis] = []
    for vid in sorted(vehicles):
        state = vehicles[vid]
        match = road_map.match(state.position, state.heading)
        if match is None:
            if skipped is not None:
                skipped.append(vid)
            continue
        lane_id, s_on_lane, _ = match
        reach = state.v * config.horizon + 60.0
        options = road_map.route_options(lane_id, s_on_lane + reach)
        prob = 1.0 / len(options)
        for k, lane_ids in enumerate(options):
            route = road_map.route(lane_ids)
            profile = road_map.profile(route, config.a_lat_max, config.a_lon_comf)
            trace = _propagate(
                s0=s_on_lane,
                v0=state.v,
                leader_fn=None,
                params=config.idm,
                dt=dt,
                n=n,
                v_target_fn=profile.value,
                model="idm",
            )
            pts = route.centerline.points_at(trace[:, 0])
            heading = np.array([route.centerline.heading_at(s) for s in trace[:, 0]])
            out.append(
                TrajectoryHypothesis(
                    vehicle_id=vid,
                    option=k,
                    probability=prob,
                    route=route,
                    s=trace[:, 0],
                    v=trace[:, 1],
                    a=trace[:, 2],
                    points=pts,
                    heading=heading,
                    length=state.length,
                    width=state.width,
                    v_target_fn=profile.value,
                )
            )
    return out


def _propagate(s0, v0, leader_fn, params: IdmParams, dt, n, v_target_fn=None, model="eidm"):
    """Semi-implicit rollout with a per-step leader callback."""
    accel = eidm_accel if model == "eidm" else idm_accel
    s, v = float(s0), max(float(v0), 0.0)
    out = np.empty((n, 3))
    for i in range(n):
        p = params if v_target_fn is None else params.with_v_target(v_target_fn(s))
        leader = leader_fn(i, s, v) if leader_fn is not None else None
        a = accel(v, leader, p)
        out[i] = (s, v, a)
        if i < n - 1:
            v_next = max(0.0, v + a * dt)
            s = s + 0.5 * (v + v_next) * dt
            v = v_next
    return out


def _on_path(line, points) -> np.ndarray:
    """True where a point genuinely occupies the path laterally.

    Euclidean distance, not the perpendicular component: a point beyond
    the polyline end on its extension must not count as occupying it.
    """
    return line.distance_many(np.atleast_2d(points)) < OCCUPANCY_HALF_WIDTH


def find_leader(
    ego_s: float,
    ego_route: Route,
    hypotheses: Sequence[TrajectoryHypothesis],
) -> Optional[TrajectoryHypothesis]:
    """The nearest vehicle currently occupying the ego path ahead.

    Uses each vehicle's most probable hypothesis; returns ``None`` on a
    free road.
    """
    best = None
    best_s = np.inf
    for hyp in _best_per_vehicle(hypotheses):
        s0, _, _ = ego_route.centerline.project(hyp.points[0])
        if not _on_path(ego_route.centerline, hyp.points[0])[0] or s0 <= ego_s:
            continue
        if s0 < best_s:
            best, best_s = hyp, s0
    return best


def _best_per_vehicle(hypotheses: Sequence[TrajectoryHypothesis]):
    by_vehicle: dict[str, TrajectoryHypothesis] = {}
    for hyp in hypotheses:
        cur = by_vehicle.get(hyp.vehicle_id)
        if cur is None or (hyp.probability, -hyp.option) > (cur.probability, -cur.option):
            by_vehicle[hyp.vehicle_id] = hyp
    return [by_vehicle[k] for k in sorted(by_vehicle)]


def find_conflicts(
    road_map: RoadMap,
    ego_route: Route,
    ego_s: float,
    hypotheses: Sequence[TrajectoryHypothesis],
    config: PlannerConfig,
) -> list[ConflictInfo]:
    """Conflicting vehicles ahead of the ego, one entry per vehicle.

    A hypothesis conflicts when its route shares an annotated conflict
    point still ahead of the ego and the vehicle has not cleared it yet.
    Vehicles already following the ego path (leaders) are not conflicts.
    """
    out: list[ConflictInfo] = []
    seen: set[str] = set()
    for hyp in sorted(
        hypotheses, key=lambda h: (h.vehicle_id, -h.probability, h.option)
    ):
        if hyp.vehicle_id in seen:
            continue
        pairs = road_map.conflicts_between(ego_route, hyp.route)
        for s_ego_c, s_other_c in pairs:
            if s_ego_c <= ego_s + 1e-6:
                continue  # ego already at/past the conflict
            rear = hyp.s[0] - hyp.length / 2.0
            if rear > s_other_c + config.conflict_half_width:
                continue  # vehicle already cleared
            # same-direction merges where the vehicle is simply ahead on the
            # ego path are handled by car following, not conflict logic
            s_on_ego, _, _ = ego_route.centerline.project(hyp.points[0])
            if _on_path(ego_route.centerline, hyp.points[0])[0] and s_on_ego > ego_s:
                continue
            out.append(
                ConflictInfo(
                    vehicle_id=hyp.vehicle_id,
                    hypothesis=hyp,
                    s_conflict_ego=s_ego_c,
                    s_conflict_other=s_other_c,
                )
            )
            seen.add(hyp.vehicle_id)
            break
    return out


def generate_candidates(
    ego_s: float,
    ego_v: float,
    ego_route: Route,
    profile_fn: Callable[[float], float],
    leader: Optional[TrajectoryHypothesis],
    conflicts: Sequence[ConflictInfo],
    config: PlannerConfig,
) -> list[BehaviorTrajectory]:
    """Candidate set: free/follow, one yield per conflicting vehicle, stop.

    Every candidate is an N-step rollout along the ego route. The set is
    never empty: the free/follow candidate always exists (labelled
    ``go_before`` when conflicts are present).
    """
    n, dt = config.n_points, config.dt
    idm = config.idm
    ego_len = config.ego_length
    candidates: list[BehaviorTrajectory] = []

    leader_s = leader_v = None
    if leader is not None:
        s_proj, _, _ = ego_route.centerline.project_many(leader.points)
        leader_s = s_proj
        leader_v = leader.v

    def leader_obs(i, s, v):
        if leader_s is None:
            return None
        j = min(i, len(leader_s) - 1)
        gap = leader_s[j] - s - (leader.length + ego_len) / 2.0
        return LeaderObservation(
            gap=max(gap, 1e-3), dv=v - leader_v[j], leader_accel=leader.a[j]
        )

    trace = _propagate(ego_s, ego_v, leader_obs if leader is not None else None,
                       idm, dt, n, v_target_fn=profile_fn)
    label = "follow" if leader is not None else "free"
    if conflicts:
        label = "go_before"
    candidates.append(_to_trajectory(trace, ego_route, label))

    for info in conflicts:
        hyp = info.hypothesis

        def virtual_obs(i, s, v, info=info, hyp=hyp):
            j = min(i, len(hyp.s) - 1)
            remaining = info.s_conflict_other - (hyp.s[j] - hyp.length / 2.0)
            if remaining < 0.0:
                return leader_obs(i, s, v)  # cleared: fall back to real leader
            gap = (info.s_conflict_ego - s) - remaining - config.virtual_leader_margin
            return LeaderObservation(gap=max(gap, 1e-3), dv=v - hyp.v[j],
                                     leader_accel=hyp.a[j])

        trace = _propagate(ego_s, ego_v, virtual_obs, idm, dt, n, v_target_fn=profile_fn)
        candidates.append(
            _to_trajectory(_clamp_standstill(trace), ego_route,
                           f"yield_to:{info.vehicle_id}")
        )

    if conflicts:
        entry = min(info.s_conflict_ego for info in conflicts) - config.conflict_half_width
        stop_line = entry - config.stop_line_offset

        def stop_obs(i, s, v):
            gap = stop_line - s - ego_len / 2.0
            return LeaderObservation(gap=max(gap, 1e-3), dv=v, leader_accel=0.0)

        trace = _propagate(ego_s, ego_v, stop_obs, idm, dt, n, v_target_fn=profile_fn)
        candidates.append(_to_trajectory(_clamp_standstill(trace), ego_route, "stop"))

    return candidates


def _clamp_standstill(trace: np.ndarray) -> np.ndarray:
    """Freeze the asymptotic crawl of a braking rollout.

    Once slow with negligible remaining motion, the anchor sits exactly
    still; the driver model alone only reaches standstill asymptotically.
    """
    slow = (trace[:, 1] < 0.15) & (trace[-1, 0] - trace[:, 0] < 0.5)
    if slow.any():
        k = int(np.argmax(slow))
        trace = trace.copy()
        trace[k:, 0] = trace[k, 0]
        trace[k:, 1] = 0.0
        trace[k:, 2] = 0.0
    return trace


def _to_trajectory(trace: np.ndarray, route: Route, maneuver: str) -> BehaviorTrajectory:
    s = np.minimum(trace[:, 0], route.length)
    return BehaviorTrajectory(
        points=route.centerline.points_at(s),
        s=trace[:, 0],
        v=trace[:, 1],
        a=trace[:, 2],
        maneuver=maneuver,
    )


def behavior_cost(
    candidate: BehaviorTrajectory,
    hypotheses: Sequence[TrajectoryHypothesis],
    config: PlannerConfig,
) -> float:
    """Social cost: negated mean ego acceleration plus the probability-
    weighted mean braking reaction the candidate forces onto others."""
    j_e = -float(np.mean(candidate.a))
    total = config.w_e * j_e
    for hyp in hypotheses:
        j_o = _reaction_deviation(candidate, hyp, config)
        total += config.w_o * hyp.probability * j_o
    return total


def _reaction_deviation(
    candidate: BehaviorTrajectory, hyp: TrajectoryHypothesis, config: PlannerConfig
) -> float:
    """Mean |acceleration deviation| of one hypothesis reacting to the ego.

    The vehicle is re-propagated with the plain driver model, seeing the
    ego candidate as its leader whenever the candidate occupies its path
    ahead of it; the unimpeded baseline is the hypothesis itself (same
    integrator, so no interaction means exactly zero deviation).
    """
    s_proj, occupied = _hypothesis_on_ego_path_inverse(candidate, hyp)

    def obs(i, s, v):
        if not occupied[i] or s_proj[i] <= s:
            return None
        gap = s_proj[i] - s - (hyp.length + config.ego_length) / 2.0
        return LeaderObservation(gap=max(gap, 1e-3), dv=v - candidate.v[i])

    reacted = _propagate(
        hyp.s[0], hyp.v[0], obs, config.idm, config.dt, len(candidate),
        v_target_fn=hyp.v_target_fn, model="idm",
    )
    return float(np.mean(np.abs(reacted[:, 2] - hyp.a)))


def _hypothesis_on_ego_path_inverse(candidate: BehaviorTrajectory, hyp: TrajectoryHypothesis):
    """Project the ego candidate onto the hypothesis route."""
    s_proj, _, _ = hyp.route.centerline.project_many(candidate.points)
    return s_proj, _on_path(hyp.route.centerline, candidate.points)


_PRIORITY = {"free": 0, "follow": 0, "go_before": 0, "stop": 2}


def select_behavior(
    candidates: Sequence[BehaviorTrajectory],
    hypotheses: Sequence[TrajectoryHypothesis],
    conflicts: Sequence[ConflictInfo],
    ego_route: Route,
    config: PlannerConfig,
) -> tuple[BehaviorTrajectory, SpatioTemporalCorridor]:
    """Pick the cheapest candidate whose corridor is valid.

    Ties break toward the higher-priority maneuver (follow/free over yield
    over stop). A candidate whose corridor is infeasible or does not
    contain the candidate itself is not executable (e.g. going first when
    the gap closes too early) and selection moves on to the next-cheapest;
    the stop candidate is the final fallback.
    """
    if not candidates:
        raise ValueError("candidate set must not be empty")

    def priority(c: BehaviorTrajectory) -> int:
        return _PRIORITY.get(c.maneuver.split(":")[0], 1)

    scored = sorted(
        (behavior_cost(c, hypotheses, config), priority(c), i)
        for i, c in enumerate(candidates)
    )
    fallback = None
    for _, _, i in scored:
        chosen = candidates[i]
        corridor = build_corridor(chosen, conflicts, ego_route, config)
        if corridor.feasible() and corridor.contains(chosen.s):
            return chosen, corridor
        if fallback is None:
            fallback = (chosen, corridor)
    stops = [c for c in candidates if c.maneuver == "stop"]
    if stops:
        chosen = stops[0]
        return chosen, build_corridor(chosen, conflicts, ego_route, config)
    return fallback


def build_corridor(
    chosen: BehaviorTrajectory,
    conflicts: Sequence[ConflictInfo],
    ego_route: Route,
    config: PlannerConfig,
) -> SpatioTemporalCorridor:
    """Arc-length window around the chosen maneuver.

    The upper bound limits deviation from the behavior trajectory and, for
    yielding/stopping, holds the ego before the conflict entry until the
    blocking vehicle's predicted rear has cleared. Going first converts
    the follower's predicted arrival into a minimum exit progress.
    """
    n = len(chosen)
    route_end = ego_route.length
    s_max = np.minimum(chosen.s + config.corridor_slack, route_end)
    s_min = np.zeros(n)
    kind = chosen.maneuver.split(":")[0]

    if kind in ("yield_to", "stop"):
        relevant = conflicts
        if kind == "yield_to":
            target = chosen.maneuver.split(":", 1)[1]
            relevant = [c for c in conflicts if c.vehicle_id == target] or conflicts
        for info in relevant:
            entry_bound = (
                info.s_conflict_ego
                - config.conflict_half_width
                - config.ego_length / 2.0
                - config.conflict_margin
            )
            hyp = info.hypothesis
            cleared = (
                hyp.s - hyp.length / 2.0
                > info.s_conflict_other + config.conflict_half_width
            )
            blocked = ~cleared if kind == "yield_to" else np.ones(n, dtype=bool)
            s_max = np.where(blocked[:n], np.minimum(s_max, entry_bound), s_max)
        # keep the window monotone after the bound opens
        s_max = np.maximum.accumulate(s_max)

    if kind == "go_before" and conflicts:
        horizon = (n - 1) * config.dt
        for info in conflicts:
            hyp = info.hypothesis
            exit_req = (
                info.s_conflict_ego
                + config.conflict_half_width
                + config.ego_length / 2.0
                + config.conflict_margin
            )
            arrival = (
                hyp.s + hyp.length / 2.0
                >= info.s_conflict_other - config.conflict_half_width
            )
            if arrival.any():
                i_arr = int(np.argmax(arrival))
                s_min[i_arr:] = np.maximum(s_min[i_arr:], exit_req)
                continue
            # neither party meets the conflict inside the horizon: settle
            # the race by extrapolation so the ego never outruns its last
            # stopping opportunity on a promise it cannot verify
            if chosen.s[-1] >= exit_req:
                continue  # ego clears within the horizon, vehicle does not arrive
            remaining = (
                info.s_conflict_other
                - config.conflict_half_width
                - (hyp.s[-1] + hyp.length / 2.0)
            )
            t_arrive = horizon + max(remaining, 0.0) / max(hyp.v[-1], 0.1)
            t_clear = horizon + (exit_req - chosen.s[-1]) / max(chosen.v[-1], 0.1)
            if t_clear + config.go_before_time_margin > t_arrive:
                # lost race: demand full clearance at the horizon end, which
                # this candidate cannot contain
                s_min[-1] = max(s_min[-1], exit_req)

    return SpatioTemporalCorridor(s_min=s_min, s_max=s_max)
