"""On-road motion planning: driver-model behavior generation feeding a
central constrained trajectory optimization, governed by a decision state
machine, with an emergency fallback, plus a closed-loop scenario simulator.
"""

from .config import PlannerConfig
from .drivers import IdmParams, LeaderObservation, eidm_accel, idm_accel
from .road import Lane, Polyline, Route, VehicleState, VelocityProfile

__all__ = [
    "PlannerConfig",
    "IdmParams",
    "LeaderObservation",
    "idm_accel",
    "eidm_accel",
    "Lane",
    "Polyline",
    "Route",
    "VehicleState",
    "VelocityProfile",
]

__version__ = "0.1.0"
