"""Situation assessment and the operating-mode state machine.

Lane-change desirability follows the MOBIL idea: compare the model
accelerations of the ego and the affected followers between the current
situation and the hypothetical one after the change, weighted by a
politeness factor. Criticality checks whether constant-deceleration
braking still avoids a rear-end collision. The state machine arbitrates
between longitudinal traffic mode, lane changing, and the emergency mode,
with emergency preempting everything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .drivers import IdmParams, LeaderObservation, eidm_accel
from .road import Route

LTM = "ltm"
LANE_CHANGE = "lane_change"
EMERGENCY = "emergency"


@dataclass
class SituationFlags:
    """Boolean transition variables, recomputed every planning cycle."""

    incentive_left: bool = False
    incentive_right: bool = False
    safe_left: bool = False
    safe_right: bool = False
    structural_gate: bool = False
    critical: bool = False
    # state of an in-progress lane change, ignored outside that mode
    lane_change_complete: bool = False
    lane_change_still_safe: bool = True


@dataclass
class PlannerState:
    """Operating mode plus the bookkeeping the transitions need."""

    mode: str = LTM
    lc_target: Optional[str] = None
    lc_source: Optional[str] = None
    lc_side: Optional[str] = None
    mode_entry_time: float = 0.0
    last_critical_time: float = -math.inf


@dataclass
class LaneActor:
    """A vehicle reduced to its arc position on one specific lane."""

    s: float
    v: float
    accel: float = 0.0
    length: float = 4.5


def _gap_between(rear: LaneActor, front: LaneActor) -> float:
    return front.s - rear.s - (front.length + rear.length) / 2.0


def _observation(rear: LaneActor, front: Optional[LaneActor]) -> Optional[LeaderObservation]:
    if front is None:
        return None
    return LeaderObservation(
        gap=max(_gap_between(rear, front), 1e-3),
        dv=rear.v - front.v,
        leader_accel=front.accel,
    )


def _leader_of(actor_s: float, others: Sequence[LaneActor]) -> Optional[LaneActor]:
    ahead = [o for o in others if o.s > actor_s]
    return min(ahead, key=lambda o: o.s) if ahead else None


def _follower_of(actor_s: float, others: Sequence[LaneActor]) -> Optional[LaneActor]:
    behind = [o for o in others if o.s < actor_s]
    return max(behind, key=lambda o: o.s) if behind else None


def mobil_incentive(
    ego: LaneActor,
    current_lane: Sequence[LaneActor],
    candidate_lane: Sequence[LaneActor],
    params: IdmParams,
    politeness: float = 0.3,
    a_threshold: float = 0.1,
    bias: float = 0.0,
) -> tuple[bool, float]:
    """Acceleration-balance score for a hypothetical lane change.

    ``score = (a_ego' - a_ego) + politeness * sum(a_other' - a_other)``
    over the new follower on the candidate lane and the old follower on
    the current lane; missing neighbors count as free road. The change is
    an incentive when the score exceeds ``a_threshold + bias``.
    """
    a_ego = eidm_accel(ego.v, _observation(ego, _leader_of(ego.s, current_lane)), params)
    a_ego_new = eidm_accel(
        ego.v, _observation(ego, _leader_of(ego.s, candidate_lane)), params
    )
    score = a_ego_new - a_ego

    new_follower = _follower_of(ego.s, candidate_lane)
    if new_follower is not None:
        before = eidm_accel(
            new_follower.v,
            _observation(new_follower, _leader_of(new_follower.s, candidate_lane)),
            params,
        )
        after = eidm_accel(new_follower.v, _observation(new_follower, ego), params)
        score += politeness * (after - before)

    old_follower = _follower_of(ego.s, current_lane)
    if old_follower is not None:
        before = eidm_accel(old_follower.v, _observation(old_follower, ego), params)
        after = eidm_accel(
            old_follower.v,
            _observation(old_follower, _leader_of(ego.s, current_lane)),
            params,
        )
        score += politeness * (after - before)

    return score > a_threshold + bias, score


def lane_change_safety(
    ego: LaneActor,
    candidate_lane: Sequence[LaneActor],
    params: IdmParams,
    b_safe: float = 4.0,
) -> bool:
    """Safe when neither the new follower nor the ego must brake harder
    than ``b_safe`` after the hypothetical change."""
    new_follower = _follower_of(ego.s, candidate_lane)
    if new_follower is not None:
        induced = eidm_accel(new_follower.v, _observation(new_follower, ego), params)
        if induced < -b_safe:
            return False
    new_leader = _leader_of(ego.s, candidate_lane)
    if new_leader is not None:
        required = eidm_accel(ego.v, _observation(ego, new_leader), params)
        if required < -b_safe:
            return False
    return True


def structural_gate(
    route: Route,
    s_ego: float,
    lookahead: float = 150.0,
    kappa_gate: float = 0.03,
) -> bool:
    """False when an intersection approach, roundabout, or high-curvature
    section lies within ``lookahead`` meters along the route."""
    s_end = min(s_ego + lookahead, route.length)
    for lane in route.lanes:
        start = route.lane_offset(lane.lane_id)
        stop = start + lane.centerline.length
        if stop < s_ego or start > s_end:
            continue
        if lane.lane_type in ("roundabout", "intersection_approach"):
            return False
    line = route.centerline
    kappa = line.vertex_curvature()
    in_reach = (line.s >= s_ego) & (line.s <= s_end)
    if in_reach.any() and float(abs(kappa[in_reach]).max()) > kappa_gate:
        return False
    return True


def criticality(leader: Optional[LeaderObservation], a_critical: float = 5.0) -> bool:
    """True when constant-deceleration braking cannot keep the gap open."""
    if leader is None:
        return False
    if leader.gap <= 0.0:
        return True
    if leader.dv <= 0.0:
        return False
    required = leader.dv**2 / (2.0 * leader.gap)
    return required > a_critical


def step_fsm(
    state: PlannerState,
    flags: SituationFlags,
    t: float,
    dwell: float = 1.0,
) -> PlannerState:
    """One deterministic transition. Priority: emergency > lane change > LTM.

    A lane change aborts back toward its source lane when the safety flag
    drops; the emergency mode is absorbing until criticality has been clear
    for ``dwell`` seconds.
    """
    if flags.critical:
        return replace(
            state,
            mode=EMERGENCY,
            mode_entry_time=t if state.mode != EMERGENCY else state.mode_entry_time,
            last_critical_time=t,
            lc_target=None,
            lc_source=None,
            lc_side=None,
        )

    if state.mode == EMERGENCY:
        if t - state.last_critical_time >= dwell:
            return PlannerState(mode=LTM, mode_entry_time=t, last_critical_time=state.last_critical_time)
        return state

    if state.mode == LANE_CHANGE:
        if not flags.lane_change_still_safe:
            # abort: retarget the source lane, swap roles
            side = None
            if state.lc_side == "left":
                side = "right"
            elif state.lc_side == "right":
                side = "left"
            return replace(
                state,
                lc_target=state.lc_source,
                lc_source=state.lc_target,
                lc_side=side,
                mode_entry_time=t,
            )
        if flags.lane_change_complete:
            return PlannerState(mode=LTM, mode_entry_time=t, last_critical_time=state.last_critical_time)
        return state

    # LTM: consider starting a lane change, left side first
    if flags.structural_gate:
        if flags.incentive_left and flags.safe_left:
            return PlannerState(
                mode=LANE_CHANGE,
                lc_side="left",
                mode_entry_time=t,
                last_critical_time=state.last_critical_time,
            )
        if flags.incentive_right and flags.safe_right:
            return PlannerState(
                mode=LANE_CHANGE,
                lc_side="right",
                mode_entry_time=t,
                last_critical_time=state.last_critical_time,
            )
    return state
