"""Safety-critical trajectory generation.

Two convex quadratic programs solved in sequence: a longitudinal braking
profile (minimum squared jerk with a hard stop-distance bound), then a
lateral offset profile along the braking solution (minimum squared
third-difference plus an offset penalty inside a per-step corridor). Both
are small dense QPs solved by an interior-point method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from cvxopt import matrix, solvers

from .road import Polyline

_QP_OPTIONS = {
    "show_progress": False,
    "abstol": 1e-9,
    "reltol": 1e-9,
    "feastol": 1e-9,
    "maxiters": 200,
}


@dataclass
class LonParams:
    """Longitudinal emergency problem over N steps of dt."""

    v0: float
    a0: float
    a_min: float  # braking floor, negative
    s_stop: float  # hard bound on traveled distance (clearance-adjusted)
    dt: float
    n: int = 60
    w_v_terminal: float = 10.0

    def __post_init__(self):
        if self.a_min >= 0.0:
            raise ValueError("a_min must be negative")
        if self.s_stop <= 0.0:
            raise ValueError("stop distance must be ahead of the vehicle")


@dataclass
class LatParams:
    """Lateral evasive problem: offset corridor and comfort bound."""

    d_min: np.ndarray  # per-step lower corridor bound
    d_max: np.ndarray
    a_lat_max: float
    dt: float
    w_d_offset: float = 0.1
    d0: float = 0.0


@dataclass
class LonTrace:
    s: np.ndarray
    v: np.ndarray
    a: np.ndarray


class Infeasible(Exception):
    """The QP admits no solution under the given bounds."""


def diff_ops(n: int, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward first/second/third difference operators on n samples."""
    D1 = (np.eye(n, k=1) - np.eye(n))[:-1] / dt
    D2 = (np.eye(n, k=2) - 2.0 * np.eye(n, k=1) + np.eye(n))[:-2] / dt**2
    D3 = (np.eye(n, k=3) - 3.0 * np.eye(n, k=2) + 3.0 * np.eye(n, k=1) - np.eye(n))[
        :-3
    ] / dt**3
    return D1, D2, D3


def lon_qp_matrices(p: LonParams):
    """Assemble (P, q, G, h, A, b) of the longitudinal QP."""
    n, dt = p.n, p.dt
    D1, D2, D3 = diff_ops(n, dt)

    # objective: squared jerk (third differences, plus the initial jerk
    # referencing a0) + terminal-speed penalty
    P = 2.0 * D3.T @ D3
    q = np.zeros(n)
    j0_row = D2[0] / dt  # (a_1 - a0) / dt
    P += 2.0 * np.outer(j0_row, j0_row)
    q += -2.0 * (p.a0 / dt) * j0_row
    vN_row = np.zeros(n)
    vN_row[-1], vN_row[-2] = 1.0 / dt, -1.0 / dt
    P += 2.0 * p.w_v_terminal * np.outer(vN_row, vN_row)
    # relative ridge: the jerk operator alone has a polynomial nullspace
    P += 1e-10 * np.abs(P).max() * np.eye(n)

    G = np.vstack((-D1, D2, -D2, np.eye(n)))
    h = np.concatenate(
        (
            np.zeros(n - 1),  # speed non-negative / s monotone
            np.zeros(n - 2),  # a <= 0
            -p.a_min * np.ones(n - 2),  # a >= a_min
            np.full(n, p.s_stop),  # never beyond the stop point
        )
    )
    A = np.zeros((2, n))
    A[0, 0] = 1.0
    A[1, 1] = 1.0
    b = np.array([0.0, p.v0 * dt])
    return P, q, G, h, A, b


def lat_qp_matrices(p: LatParams):
    """Assemble (P, q, G, h, A, b) of the lateral QP."""
    n = len(p.d_min)
    _, D2, D3 = diff_ops(n, p.dt)
    P = 2.0 * D3.T @ D3 + 2.0 * p.w_d_offset * np.eye(n)
    q = np.zeros(n)
    G = np.vstack((np.eye(n), -np.eye(n), D2, -D2))
    h = np.concatenate(
        (
            np.asarray(p.d_max, dtype=float),
            -np.asarray(p.d_min, dtype=float),
            np.full(n - 2, p.a_lat_max),
            np.full(n - 2, p.a_lat_max),
        )
    )
    A = np.zeros((2, n))
    A[0, 0] = 1.0
    A[1, 1] = 1.0
    b = np.array([p.d0, p.d0])
    return P, q, G, h, A, b


def _solve_qp(P, q, G, h, A, b):
    # normalize objective magnitude and constraint row norms: the interior
    # point's absolute tolerances are meaningless on raw 1/dt^6 scales
    scale = max(np.abs(P).max(), 1.0)
    P = P / scale
    q = q / scale
    row_norms = np.maximum(np.abs(G).max(axis=1), 1e-12)
    G = G / row_norms[:, None]
    h = h / row_norms
    solvers.options.update(_QP_OPTIONS)
    try:
        sol = solvers.qp(
            matrix(P), matrix(q), matrix(G), matrix(h), matrix(A), matrix(b)
        )
    except (ValueError, ZeroDivisionError, ArithmeticError) as exc:
        raise Infeasible(str(exc)) from exc
    if sol["status"] != "optimal":
        raise Infeasible(f"qp status {sol['status']}")
    return np.asarray(sol["x"]).ravel()


def solve_emergency_lon(p: LonParams) -> LonTrace:
    """Minimum-jerk braking profile bounded by the stop distance.

    Decision variables are the traveled distances ``s_1..s_N`` with the
    first two pinned to the current state. Raises :class:`Infeasible` when
    even full braking overshoots (kinematic pre-check ``v0^2 / 2|a_min|``)
    or the QP reports no solution.
    """
    if p.v0 < 0.0:
        raise ValueError("speed must be non-negative")
    if p.v0**2 / (2.0 * abs(p.a_min)) > p.s_stop:
        raise Infeasible("braking distance exceeds stop distance")
    n, dt = p.n, p.dt
    if p.v0 < 1e-9:
        # already standing: the feasible set degenerates to a point
        zeros = np.zeros(n)
        return LonTrace(s=zeros, v=zeros.copy(), a=zeros.copy())
    s = _solve_qp(*lon_qp_matrices(p))
    D1, D2, _ = diff_ops(n, dt)
    v = np.concatenate((D1 @ s, [(s[-1] - s[-2]) / dt]))
    a_inner = D2 @ s  # the QP's per-window accelerations
    a = np.concatenate((a_inner, a_inner[-1:], a_inner[-1:]))
    return LonTrace(s=s, v=np.maximum(v, 0.0), a=a)


def solve_emergency_lat(p: LatParams, lon: LonTrace) -> np.ndarray:
    """Lateral offsets around the braking profile, inside the corridor.

    The comfort constraint bounds the second time difference of the offset
    (the lateral acceleration while tracking the path at the longitudinal
    solution's speeds). Raises :class:`Infeasible` when corridor and
    comfort bound conflict.
    """
    d_min = np.asarray(p.d_min, dtype=float)
    d_max = np.asarray(p.d_max, dtype=float)
    if len(d_min) != len(lon.s):
        raise ValueError("corridor must match the longitudinal horizon")
    if np.any(d_min > d_max):
        raise Infeasible("empty lateral corridor")
    return _solve_qp(*lat_qp_matrices(p))


def assemble_emergency_trajectory(
    lon: LonTrace, lat: np.ndarray, path: Polyline, s_offset: float = 0.0
) -> np.ndarray:
    """Map the (s, d) traces to world-frame points on the ego path."""
    n = len(lon.s)
    pts = np.empty((n, 2))
    for i in range(n):
        s = min(s_offset + lon.s[i], path.length)
        pts[i] = path.frenet_to_cartesian(s, lat[i])
    return pts
