"""Lane-change behavior trajectories.

Rolls out the planar kinematic single-track model with pure-pursuit
steering toward the target-lane reference line and car-following
acceleration against the target-lane leader. The rollout is the behavior
anchor for the central optimization; it need not lie on either centerline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .drivers import IdmParams, LeaderObservation, eidm_accel
from .road import Polyline


@dataclass
class SingleTrackState:
    x: float
    y: float
    theta: float  # heading, normalized to (-pi, pi]
    v: float

    def __post_init__(self):
        self.theta = _wrap_angle(self.theta)
        if self.v < 0.0:
            raise ValueError("speed must be non-negative")


@dataclass
class SingleTrackParams:
    l_f: float = 1.3  # mass center to front axle [m]
    l_r: float = 1.5
    delta_max: float = 0.6  # steering bound [rad]
    lookahead_gain: float = 1.0  # seconds: L = max(L_min, gain * v)
    lookahead_min: float = 4.0

    @property
    def wheelbase(self) -> float:
        return self.l_f + self.l_r


def _wrap_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a)) if abs(a) > math.pi else a


def _circle_polyline_intersection(
    center: np.ndarray, radius: float, line: Polyline, s_from: float
) -> Optional[np.ndarray]:
    """First crossing of the circle with the polyline beyond arc ``s_from``."""
    a = line.points[:-1]
    d = line._seg
    f = a - center
    A = np.einsum("ki,ki->k", d, d)
    B = 2.0 * np.einsum("ki,ki->k", f, d)
    C = np.einsum("ki,ki->k", f, f) - radius * radius
    disc = B * B - 4.0 * A * C
    ok = disc >= 0.0
    if not ok.any():
        return None
    sq = np.sqrt(np.where(ok, disc, 0.0))
    best_s = np.inf
    best_point = None
    for sign in (-1.0, 1.0):
        t = (-B + sign * sq) / (2.0 * A)
        valid = ok & (t >= 0.0) & (t <= 1.0)
        s_at = line.s[:-1] + t * line._seg_len
        valid &= s_at > s_from
        if valid.any():
            idxs = np.nonzero(valid)[0]
            k = idxs[np.argmin(s_at[idxs])]
            if s_at[k] < best_s:
                best_s = float(s_at[k])
                best_point = a[k] + t[k] * d[k]
    return best_point


def pure_pursuit_steering(
    state: SingleTrackState, target_line: Polyline, params: SingleTrackParams
) -> float:
    """Steering angle that moves the mass center toward the lookahead point
    on a circular arc.

    The lookahead point is the first intersection of the circle of radius
    ``L`` around the mass center with the target line beyond the current
    projection; if the line never reaches the circle, its nearest endpoint
    is used. The result is clamped to ``±delta_max``.
    """
    L = max(params.lookahead_min, params.lookahead_gain * state.v)
    pos = np.array([state.x, state.y])
    s_here, _, _ = target_line.project(pos)
    target = _circle_polyline_intersection(pos, L, target_line, s_here)
    if target is None:
        ends = target_line.points[[0, -1]]
        dist = np.hypot(*(ends - pos).T)
        target = ends[int(np.argmin(dist))]
    alpha = _wrap_angle(
        math.atan2(target[1] - pos[1], target[0] - pos[0]) - state.theta
    )
    kappa = 2.0 * math.sin(alpha) / L
    delta = math.atan(params.wheelbase * kappa)
    return float(np.clip(delta, -params.delta_max, params.delta_max))


def integrate_single_track(
    state: SingleTrackState, delta: float, accel: float, dt: float, params: SingleTrackParams
) -> SingleTrackState:
    """One RK4 step of the kinematic single-track model, controls held.

    The heading rate uses the small-angle form ``v * delta / wheelbase``.
    Speed is floored at zero; a standing vehicle stays put under braking.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if state.v <= 0.0 and accel <= 0.0:
        return SingleTrackState(state.x, state.y, state.theta, 0.0)
    wb = params.wheelbase

    def deriv(y):
        _, _, theta, v = y
        v = max(v, 0.0)
        return np.array(
            [v * math.cos(theta), v * math.sin(theta), v * delta / wb, accel]
        )

    y0 = np.array([state.x, state.y, state.theta, state.v])
    k1 = deriv(y0)
    k2 = deriv(y0 + 0.5 * dt * k1)
    k3 = deriv(y0 + 0.5 * dt * k2)
    k4 = deriv(y0 + dt * k3)
    y1 = y0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return SingleTrackState(y1[0], y1[1], _wrap_angle(y1[2]), max(y1[3], 0.0))


@dataclass
class LaneChangeRollout:
    """Result of a lane-change rollout: world points plus per-step
    (arc position on target line, speed, accel, steering)."""

    points: np.ndarray  # (N, 2)
    s: np.ndarray
    v: np.ndarray
    a: np.ndarray
    delta: np.ndarray
    heading: np.ndarray


def generate_lane_change(
    state: SingleTrackState,
    target_line: Polyline,
    params: SingleTrackParams,
    idm: IdmParams,
    dt: float,
    n_points: int,
    leader_s0: Optional[float] = None,
    leader_v: float = 0.0,
    leader_length: float = 4.5,
    ego_length: float = 4.5,
    v_target_fn=None,
) -> LaneChangeRollout:
    """N-step rollout toward the target lane.

    Steering comes from pure pursuit against the target centerline; the
    acceleration from the enhanced driver model with the target-lane
    leader, whose gap is measured along the target line and propagated at
    constant speed. ``v_target_fn`` re-reads the target speed per step.
    """
    pts = np.empty((n_points, 2))
    s_arr = np.empty(n_points)
    v_arr = np.empty(n_points)
    a_arr = np.empty(n_points)
    d_arr = np.empty(n_points)
    h_arr = np.empty(n_points)
    cur = state
    for i in range(n_points):
        pos = np.array([cur.x, cur.y])
        s_here, _, _ = target_line.project(pos)
        p = idm if v_target_fn is None else idm.with_v_target(v_target_fn(s_here))
        leader = None
        if leader_s0 is not None:
            gap = (leader_s0 + leader_v * i * dt) - s_here - (leader_length + ego_length) / 2.0
            leader = LeaderObservation(gap=max(gap, 1e-3), dv=cur.v - leader_v)
        a = eidm_accel(cur.v, leader, p)
        delta = pure_pursuit_steering(cur, target_line, params)
        pts[i] = pos
        s_arr[i] = s_here
        v_arr[i] = cur.v
        a_arr[i] = a
        d_arr[i] = delta
        h_arr[i] = cur.theta
        if i < n_points - 1:
            cur = integrate_single_track(cur, delta, a, dt, params)
    return LaneChangeRollout(points=pts, s=s_arr, v=v_arr, a=a_arr, delta=d_arr, heading=h_arr)
