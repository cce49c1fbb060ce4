"""Planner configuration: weights, bounds, tolerances, model parameters.

Everything tunable lives here so scenario files can override any field by
name. Defaults are conventional operating points, not calibrated values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .drivers import IdmParams


@dataclass
class PlannerConfig:
    # trajectory interface: N support points at fixed step dt
    n_points: int = 60
    dt: float = 0.05
    replan_every: int = 2  # simulator ticks between replans

    # central optimization cost weights (behavior, accel, jerk, snap)
    w_b: float = 1.0
    w_a: float = 2.0
    w_j: float = 4.0
    w_s: float = 2.0

    # central optimization constraints
    a_max: float = 3.0
    a_max_emergency: float = 10.0
    w_b_emergency: float = 50.0  # tight tracking of the emergency QP anchor
    tol_h: float = 1e-3
    tol_g: float = 1e-4
    max_outer_iter: int = 50
    max_inner_iter: int = 100
    rear_triangle_length: float = 3.0
    obstacle_cull_factor: float = 2.0  # cull beyond factor * horizon * v_max

    # ego body (defaults approximate a mid-size sedan)
    ego_length: float = 4.5
    ego_width: float = 1.9
    wheelbase_front: float = 1.3  # mass center to front axle [m]
    wheelbase_rear: float = 1.5

    # driver model defaults
    idm: IdmParams = field(default_factory=IdmParams)

    # velocity profile
    a_lat_max: float = 2.0
    a_lon_comf: float = 1.5

    # behavior generation
    w_e: float = 1.0
    w_o: float = 1.0
    corridor_slack: float = 10.0        # max forward deviation from behavior traj [m]
    conflict_margin: float = 2.0        # clearance kept to conflict entry [m]
    conflict_half_width: float = 2.5    # half extent of a conflict region [m]
    stop_line_offset: float = 1.0       # stop point ahead of conflict entry [m]
    go_before_time_margin: float = 1.0  # required lead over a crosser's arrival [s]
    virtual_leader_margin: float = 3.0

    # lane change / pure pursuit
    lookahead_min: float = 4.0
    lookahead_gain: float = 1.0  # seconds of travel
    delta_max: float = 0.6       # steering angle bound [rad]

    # decision making
    mobil_politeness: float = 0.3
    mobil_a_threshold: float = 0.1
    mobil_b_safe: float = 4.0
    mobil_bias: float = 0.0
    a_critical: float = 5.0
    gate_lookahead: float = 150.0
    kappa_gate: float = 0.03
    emergency_dwell: float = 1.0
    lc_complete_offset: float = 0.3
    lc_complete_heading: float = 0.15  # [rad]

    # emergency QPs
    a_min: float = -8.0
    w_v_terminal: float = 10.0
    w_d_offset: float = 0.1
    a_lat_max_emergency: float = 5.0
    emergency_clearance: float = 1.0

    # simulation
    sim_v_max: float = 20.0
    dump_solver_csv: bool = False

    @property
    def horizon(self) -> float:
        """Temporal extent spanned by the support points [s]."""
        return (self.n_points - 1) * self.dt

    @property
    def wheelbase(self) -> float:
        return self.wheelbase_front + self.wheelbase_rear

    @property
    def ego_radius(self) -> float:
        """Radius of the single collision circle at the mass center."""
        return 0.5 * (self.ego_width**2 + (self.ego_length / 3.0) ** 2) ** 0.5

    def merged(self, overrides: dict) -> "PlannerConfig":
        """Return a copy with ``overrides`` applied; unknown keys rejected."""
        known = {f.name: f for f in fields(PlannerConfig)}
        kwargs = {}
        for key, value in overrides.items():
            if key == "idm":
                if not isinstance(value, dict):
                    raise KeyError("idm override must be a mapping")
                idm_known = {f.name for f in fields(IdmParams)}
                bad = set(value) - idm_known
                if bad:
                    raise KeyError(f"unknown idm config keys: {sorted(bad)}")
                base = {f.name: getattr(self.idm, f.name) for f in fields(IdmParams)}
                base.update(value)
                kwargs["idm"] = IdmParams(**base)
            elif key in known:
                kwargs[key] = value
            else:
                raise KeyError(f"unknown config key: {key}")
        base = {f.name: getattr(self, f.name) for f in fields(PlannerConfig)}
        base.update(kwargs)
        return PlannerConfig(**base)
