"""Car-following driver models.

Implements the intelligent driver model, its enhanced variant with the
constant-acceleration heuristic (which softens overreactive braking), the
semi-implicit integration used to roll out longitudinal behavior along a
lane, and the virtual-leader projection that maps a vehicle on a
conflicting lane onto the ego lane.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

# hard floor applied to every model acceleration [m/s^2]
B_EMERGENCY = 9.0


@dataclass
class IdmParams:
    """Parameters of the (enhanced) intelligent driver model.

    ``c`` is the coolness factor of the enhanced model: 0 reproduces the
    constant-acceleration heuristic whenever it is more optimistic, 1 keeps
    a smooth blend.
    """

    a: float = 1.4          # max acceleration [m/s^2]
    b: float = 2.0          # comfortable deceleration [m/s^2], positive
    v_target: float = 13.89  # desired speed [m/s]
    T_headway: float = 1.5   # time headway [s]
    s0: float = 2.0          # jam distance [m]
    zeta: float = 4.0        # acceleration exponent
    c: float = 0.99          # coolness factor in [0, 1]
    b_emergency: float = B_EMERGENCY

    def __post_init__(self):
        if min(self.a, self.b, self.s0, self.T_headway, self.v_target) <= 0.0:
            raise ValueError("a, b, s0, T_headway, v_target must be positive")
        if self.zeta < 1.0:
            raise ValueError("acceleration exponent must be >= 1")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError("coolness factor must lie in [0, 1]")

    def with_v_target(self, v_target: float) -> "IdmParams":
        return replace(self, v_target=max(float(v_target), 0.1))


@dataclass
class LeaderObservation:
    """Gap and relative motion of the vehicle ahead.

    ``gap`` is front-bumper to rear-bumper distance, ``dv`` is ego speed
    minus leader speed (positive when closing).
    """

    gap: float
    dv: float
    leader_accel: float = 0.0


def idm_desired_gap(v: float, dv: float, p: IdmParams) -> float:
    """Equilibrium-seeking desired gap: s0 plus headway and closing terms."""
    dynamic = v * p.T_headway + v * dv / (2.0 * np.sqrt(p.a * p.b))
    return p.s0 + max(0.0, dynamic)


def idm_accel(v: float, leader: Optional[LeaderObservation], p: IdmParams) -> float:
    """IDM acceleration; interaction term omitted without a leader.

    Clamped below at ``-b_emergency``.
    """
    free = 1.0 - (v / p.v_target) ** p.zeta
    if leader is None:
        acc = p.a * free
    else:
        gap = max(leader.gap, 1e-3)
        s_star = idm_desired_gap(v, leader.dv, p)
        acc = p.a * (free - (s_star / gap) ** 2)
    return max(acc, -p.b_emergency)


def _cah_accel(v: float, leader: LeaderObservation, p: IdmParams) -> float:
    """Constant-acceleration heuristic of the enhanced model."""
    v_l = v - leader.dv
    a_l = min(leader.leader_accel, p.a)  # leader never assumed stronger than own a
    gap = max(leader.gap, 1e-3)
    # strict inequality: a stationary leader must fall through to the
    # closing-speed branch, not the 0/0 constant-motion branch
    if v_l * leader.dv < -2.0 * gap * a_l:
        denom = v_l * v_l - 2.0 * gap * a_l
        if abs(denom) < 1e-9:
            return a_l
        return v * v * a_l / denom
    heaviside = 1.0 if leader.dv >= 0.0 else 0.0
    return a_l - leader.dv * leader.dv * heaviside / (2.0 * gap)


def eidm_accel(v: float, leader: Optional[LeaderObservation], p: IdmParams) -> float:
    """Enhanced IDM acceleration; never below the plain IDM value.

    Without a leader, or when the IDM is already at least as optimistic as
    the constant-acceleration heuristic, this equals :func:`idm_accel`.
    """
    a_idm = idm_accel(v, leader, p)
    if leader is None:
        return a_idm
    a_cah = _cah_accel(v, leader, p)
    if a_idm >= a_cah:
        return a_idm
    blended = (1.0 - p.c) * a_idm + p.c * (
        a_cah + p.b * np.tanh((a_idm - a_cah) / p.b)
    )
    return max(blended, -p.b_emergency)


def integrate_along_lane(
    initial: tuple[float, float],
    leader_trace: Sequence[Optional[LeaderObservation]],
    p: IdmParams,
    dt: float,
    n_steps: int,
    *,
    model: str = "eidm",
    v_target_fn: Optional[Callable[[float], float]] = None,
) -> np.ndarray:
    """Roll the driver model forward along a lane.

    ``leader_trace`` provides the observation for each step (``None`` =
    free road); a shorter trace is padded with its last entry. When
    ``v_target_fn`` is given, the target speed is re-read from it at the
    current arc length each step (velocity-profile coupling).

    Returns an ``(n_steps + 1, 3)`` array of rows ``(s, v, a)`` produced by
    semi-implicit Euler: ``v' = max(0, v + a dt)``,
    ``s' = s + (v + v') dt / 2``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    accel_fn = eidm_accel if model == "eidm" else idm_accel
    s, v = float(initial[0]), max(float(initial[1]), 0.0)
    out = np.empty((n_steps + 1, 3))
    params = p
    for i in range(n_steps):
        if v_target_fn is not None:
            params = p.with_v_target(v_target_fn(s))
        leader = None
        if leader_trace is not None and len(leader_trace) > 0:
            leader = leader_trace[min(i, len(leader_trace) - 1)]
        a = accel_fn(v, leader, params)
        out[i] = (s, v, a)
        v_next = max(0.0, v + a * dt)
        s = s + 0.5 * (v + v_next) * dt
        v = v_next
    if v_target_fn is not None:
        params = p.with_v_target(v_target_fn(s))
    leader = None
    if leader_trace is not None and len(leader_trace) > 0:
        leader = leader_trace[min(n_steps - 1, len(leader_trace) - 1)] if n_steps > 0 else leader_trace[0]
    out[n_steps] = (s, v, accel_fn(v, leader, params))
    return out


def virtual_leader(
    ego_s: float,
    ego_v: float,
    conflict_ego_s: float,
    conflict_other_s: float,
    other_s: float,
    other_v: float,
    other_length: float,
    other_accel: float = 0.0,
    margin: float = 3.0,
) -> Optional[LeaderObservation]:
    """Map a vehicle on a conflicting lane onto the ego lane.

    The virtual gap matches distances to the respective conflict points:
    ego distance-to-conflict minus the other vehicle's rear-bumper
    distance-to-conflict minus a safety margin. Returns ``None`` once the
    other vehicle's rear has cleared the conflict point.
    """
    other_rear = other_s - other_length / 2.0
    other_remaining = conflict_other_s - other_rear
    if other_remaining < 0.0:
        return None
    gap = (conflict_ego_s - ego_s) - other_remaining - margin
    return LeaderObservation(gap=gap, dv=ego_v - other_v, leader_accel=other_accel)


def idm_equilibrium_gap(v: float, p: IdmParams) -> float:
    """Analytic equilibrium gap behind a leader at constant speed ``v``."""
    free = 1.0 - (v / p.v_target) ** p.zeta
    if free <= 0.0:
        raise ValueError("no equilibrium: leader at or above target speed")
    return idm_desired_gap(v, 0.0, p) / np.sqrt(free)
