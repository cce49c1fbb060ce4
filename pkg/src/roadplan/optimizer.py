"""Central trajectory optimization.

Minimizes a quadratic cost over N two-dimensional support points: a
behavior-tracking term plus acceleration, jerk and snap penalties, all
built from finite-difference operators. Subject to five inequality
constraint families: left/right free-space boundaries, dynamic obstacles
(signed pseudo-distance to per-step convex polygons), a spatio-temporal
corridor along the reference path, and an absolute-acceleration bound.

The solver is an augmented-Lagrangian outer loop with an L-BFGS inner
minimizer; when the unconstrained minimizer (a direct linear solve of the
quadratic form) is already feasible it is returned immediately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .road import Polyline, VehicleState

# ----------------------------------------------------------------------
# finite differences


def _stencil(offsets: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for the given derivative order.

    Solves the Vandermonde moment system so that the stencil reproduces
    ``order``-th derivatives exactly on polynomials up to degree
    ``len(offsets) - 1``.
    """
    k = len(offsets)
    A = np.vander(offsets.astype(float), k, increasing=True).T  # A[p, j] = o_j^p
    b = np.zeros(k)
    b[order] = math.factorial(order)
    return np.linalg.solve(A, b)


_FD_CACHE: dict[tuple[int, float, int], np.ndarray] = {}

# interior central window half-width and boundary window size per order,
# all chosen for second-order accuracy
_FD_SHAPE = {2: (1, 4), 3: (2, 5), 4: (2, 6)}


def fd_matrix(n: int, dt: float, order: int) -> np.ndarray:
    """Dense (n, n) operator mapping samples to per-step derivatives.

    Interior rows use central stencils; rows too close to either end use
    shifted windows of the same (second) order of accuracy.
    """
    if order not in _FD_SHAPE:
        raise ValueError("order must be 2, 3 or 4")
    half, wnd = _FD_SHAPE[order]
    if n < order + 1:
        raise ValueError(f"need at least {order + 1} points")
    key = (n, float(dt), order)
    cached = _FD_CACHE.get(key)
    if cached is not None:
        return cached
    D = np.zeros((n, n))
    scale = dt**order
    central = _stencil(np.arange(-half, half + 1), order) / scale
    w = min(wnd, n)
    for i in range(n):
        if half <= i < n - half:
            D[i, i - half : i + half + 1] = central
        else:
            start = min(max(i - (w - 1) // 2, 0), n - w)
            offsets = np.arange(start, start + w) - i
            D[i, start : start + w] = _stencil(offsets, order) / scale
    _FD_CACHE[key] = D
    return D


def finite_diff(points: np.ndarray, dt: float, order: int) -> np.ndarray:
    """Per-step derivative estimates of an (N, 2) support-point array."""
    pts = np.asarray(points, dtype=float)
    return fd_matrix(len(pts), dt, order) @ pts


# ----------------------------------------------------------------------
# quadratic cost


@dataclass
class CostWeights:
    """Weights of the behavior, acceleration, jerk, and snap terms."""

    w_b: float = 1.0
    w_a: float = 2.0
    w_j: float = 4.0
    w_s: float = 2.0

    def __post_init__(self):
        if self.w_b <= 0.0:
            raise ValueError("behavior weight must be positive (anchors the problem)")
        if min(self.w_a, self.w_j, self.w_s) < 0.0:
            raise ValueError("derivative weights must be non-negative")


class QuadraticCost:
    """The trajectory cost as an explicit quadratic form.

    ``J(X) = w_b sum|x_i - xb_i|^2 + w_a sum|d2_i|^2 + w_j sum|d3_i|^2
    + w_s sum|d4_i|^2`` with finite-difference derivative estimates. The
    per-coordinate Hessian ``2 (w_b I + sum w_m Dm' Dm)`` is assembled once.
    """

    def __init__(self, n: int, dt: float, weights: CostWeights):
        self.n = n
        self.dt = dt
        self.weights = weights
        self.D2 = fd_matrix(n, dt, 2)
        self.D3 = fd_matrix(n, dt, 3)
        self.D4 = fd_matrix(n, dt, 4)
        self.H = 2.0 * (
            weights.w_b * np.eye(n)
            + weights.w_a * self.D2.T @ self.D2
            + weights.w_j * self.D3.T @ self.D3
            + weights.w_s * self.D4.T @ self.D4
        )
        # stacked square-root factor: solving least squares on it instead of
        # the normal equations halves the condition-number exponent, which
        # matters because the snap operator scales like 1/dt^4
        self._A = np.vstack(
            (
                np.sqrt(weights.w_b) * np.eye(n),
                np.sqrt(weights.w_a) * self.D2,
                np.sqrt(weights.w_j) * self.D3,
                np.sqrt(weights.w_s) * self.D4,
            )
        )

    def value(self, X: np.ndarray, Xb: np.ndarray) -> float:
        w = self.weights
        diff = X - Xb
        J = w.w_b * np.sum(diff * diff)
        J += w.w_a * np.sum((self.D2 @ X) ** 2)
        J += w.w_j * np.sum((self.D3 @ X) ** 2)
        J += w.w_s * np.sum((self.D4 @ X) ** 2)
        return float(J)

    def gradient(self, X: np.ndarray, Xb: np.ndarray) -> np.ndarray:
        w = self.weights
        g = 2.0 * w.w_b * (X - Xb)
        g += 2.0 * w.w_a * self.D2.T @ (self.D2 @ X)
        g += 2.0 * w.w_j * self.D3.T @ (self.D3 @ X)
        g += 2.0 * w.w_s * self.D4.T @ (self.D4 @ X)
        return g

    def solve_pinned(self, Xb: np.ndarray, pinned: np.ndarray) -> np.ndarray:
        """Exact unconstrained minimizer with the first two points fixed."""
        n = self.n
        X = np.empty_like(Xb)
        X[:2] = pinned
        A_free = self._A[:, 2:]
        zeros = np.zeros(3 * n)
        for c in range(2):
            b = np.concatenate((np.sqrt(self.weights.w_b) * Xb[:, c], zeros))
            b -= self._A[:, :2] @ pinned[:, c]
            X[2:, c] = np.linalg.lstsq(A_free, b, rcond=None)[0]
        return X


def cost(points, behavior_points, weights: CostWeights, dt: float) -> float:
    """Scalar cost of a candidate trajectory against its behavior anchor."""
    X = np.asarray(points, dtype=float)
    Xb = np.asarray(behavior_points, dtype=float)
    return QuadraticCost(len(X), dt, weights).value(X, Xb)


def cost_gradient(points, behavior_points, weights: CostWeights, dt: float) -> np.ndarray:
    """Analytic gradient of :func:`cost` with respect to the points."""
    X = np.asarray(points, dtype=float)
    Xb = np.asarray(behavior_points, dtype=float)
    return QuadraticCost(len(X), dt, weights).gradient(X, Xb)


# ----------------------------------------------------------------------
# convex polygon utilities


def pseudo_distance(point, polygon) -> float:
    """Signed distance to a convex polygon: positive outside, -depth inside."""
    d, _ = pseudo_distance_many(np.asarray(point, dtype=float)[None, :], polygon)
    return float(d[0])


def pseudo_distance_many(points, polygon) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized signed distance and its gradient for many points.

    The gradient is the unit vector along which the signed distance grows
    fastest (nearest-point direction); on the boundary it falls back to the
    outward edge normal.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    V = np.asarray(polygon, dtype=float)
    return pseudo_distance_batch(P, np.broadcast_to(V, (P.shape[0],) + V.shape))


def pseudo_distance_batch(P: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Signed distance of point ``P[i]`` to polygon ``V[i]`` for all i.

    ``P`` is (M, 2), ``V`` is (M, K, 2) with counter-clockwise polygons.
    Returns ``(signed, grad)`` with shapes (M,) and (M, 2).
    """
    E = np.roll(V, -1, axis=1) - V  # (M, K, 2)
    elen2 = np.einsum("mki,mki->mk", E, E)
    rel = P[:, None, :] - V
    t = np.einsum("mki,mki->mk", rel, E) / elen2
    t = np.clip(t, 0.0, 1.0)
    foot = V + t[..., None] * E
    delta = P[:, None, :] - foot
    dist2 = np.einsum("mki,mki->mk", delta, delta)
    k_best = np.argmin(dist2, axis=1)
    rows = np.arange(P.shape[0])
    dist = np.sqrt(dist2[rows, k_best])
    # inside iff left of every edge (counter-clockwise polygon)
    cross = E[..., 0] * rel[..., 1] - E[..., 1] * rel[..., 0]
    inside = np.all(cross >= -1e-12, axis=1)
    signed = np.where(inside, -dist, dist)

    grad = np.zeros_like(P)
    nz = dist > 1e-9
    u = np.zeros_like(P)
    u[nz] = delta[rows, k_best][nz] / dist[nz, None]
    sign = np.where(inside, -1.0, 1.0)
    grad[nz] = sign[nz, None] * u[nz]
    if np.any(~nz):  # on the boundary: outward normal of the nearest edge
        k = k_best[~nz]
        e_sel = E[~nz][np.arange(k.size), k]
        n_out = np.column_stack((e_sel[:, 1], -e_sel[:, 0]))
        n_out /= np.hypot(n_out[:, 0], n_out[:, 1])[:, None]
        grad[~nz] = n_out
    return signed, grad


def polygons_overlap(poly_a, poly_b) -> bool:
    """Separating-axis test for two convex polygons."""
    A = np.asarray(poly_a, dtype=float)
    B = np.asarray(poly_b, dtype=float)
    for poly in (A, B):
        edges = np.roll(poly, -1, axis=0) - poly
        axes = np.column_stack((-edges[:, 1], edges[:, 0]))
        pa = A @ axes.T
        pb = B @ axes.T
        sep = (pa.max(axis=0) < pb.min(axis=0)) | (pb.max(axis=0) < pa.min(axis=0))
        if np.any(sep):
            return False
    return True


def resize_and_triangle(
    vehicle: VehicleState, r: float, tri_length: float
) -> np.ndarray:
    """Obstacle polygon: footprint inflated by ``r`` plus a rear apex.

    The apex sits ``tri_length`` behind the inflated rear edge on the
    vehicle axis and produces the lateral push-away effect when the ego
    closes in from behind. Counter-clockwise output.
    """
    hl = vehicle.length / 2.0 + r
    hw = vehicle.width / 2.0 + r
    local = [(hl, -hw), (hl, hw), (-hl, hw)]
    if tri_length > 0.0:
        local.append((-hl - tri_length, 0.0))
    local.append((-hl, -hw))
    local = np.asarray(local)
    c, s = np.cos(vehicle.heading), np.sin(vehicle.heading)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + vehicle.position


def prediction_polygons(
    poses: np.ndarray, length: float, width: float, r: float, tri_length: float
) -> list[np.ndarray]:
    """Per-step obstacle polygons from an (N, 3) pose trace (x, y, heading)."""
    out = []
    for x, y, heading in poses:
        state = VehicleState(x=x, y=y, heading=heading, v=0.0, length=length, width=width)
        out.append(resize_and_triangle(state, r, tri_length))
    return out


@dataclass
class ObstaclePrediction:
    """One dynamic obstacle: a convex polygon per planning time step."""

    vehicle_id: str
    polygons: list[np.ndarray]


@dataclass
class ConstraintSet:
    """The five constraint families of the central problem.

    Any member may be ``None`` / empty to drop that family. ``corridor`` is
    a pair of per-step arrays ``(s_min, s_max)`` interpreted along
    ``path``.
    """

    boundary_left: Polyline | None = None
    boundary_right: Polyline | None = None
    obstacles: list[ObstaclePrediction] = field(default_factory=list)
    corridor: tuple[np.ndarray, np.ndarray] | None = None
    path: Polyline | None = None
    a_max: float | None = None
    radius: float = 1.0


# residual builders ----------------------------------------------------


def build_boundary_constraints(
    points: np.ndarray, boundary: Polyline, radius: float, side: str
) -> np.ndarray:
    """Residuals ``r - clearance`` for one free-space boundary.

    ``side`` is ``"left"`` or ``"right"``; clearance is the lateral offset
    of each point from the boundary polyline measured into the free space.
    """
    _, d, _ = boundary.project_many(points)
    clearance = -d if side == "left" else d
    return radius - clearance


def build_dynamic_constraints(
    points: np.ndarray, obstacles: list[ObstaclePrediction], radius: float
) -> np.ndarray:
    """Residuals ``r - pseudo_distance`` stacked per obstacle then step."""
    rows = []
    for obs in obstacles:
        dists = np.array(
            [
                pseudo_distance(points[i], obs.polygons[min(i, len(obs.polygons) - 1)])
                for i in range(len(points))
            ]
        )
        rows.append(radius - dists)
    return np.concatenate(rows) if rows else np.empty(0)


def build_st_constraints(
    points: np.ndarray, corridor: tuple[np.ndarray, np.ndarray], path: Polyline
) -> np.ndarray:
    """Corridor residuals ``s_min - s`` and ``s - s_max`` stacked."""
    s, _, _ = path.project_many(points)
    s_min, s_max = corridor
    return np.concatenate((s_min - s, s - s_max))


def build_accel_constraints(points: np.ndarray, a_max: float, dt: float) -> np.ndarray:
    """Residuals ``|accel_i|^2 - a_max^2`` from second finite differences."""
    acc = finite_diff(points, dt, 2)
    return np.einsum("ij,ij->i", acc, acc) - a_max**2


def evaluate_constraints(
    points: np.ndarray, cs: ConstraintSet, dt: float
) -> dict[str, np.ndarray]:
    """All residual families at the given support points (<= 0 feasible)."""
    out: dict[str, np.ndarray] = {}
    if cs.boundary_left is not None:
        out["fsbl"] = build_boundary_constraints(points, cs.boundary_left, cs.radius, "left")
    if cs.boundary_right is not None:
        out["fsbr"] = build_boundary_constraints(points, cs.boundary_right, cs.radius, "right")
    if cs.obstacles:
        out["dyn"] = build_dynamic_constraints(points, cs.obstacles, cs.radius)
    if cs.corridor is not None and cs.path is not None:
        out["st"] = build_st_constraints(points, cs.corridor, cs.path)
    if cs.a_max is not None:
        out["acc"] = build_accel_constraints(points, cs.a_max, dt)
    return out


def max_violation(residuals: dict[str, np.ndarray]) -> float:
    worst = 0.0
    for arr in residuals.values():
        if arr.size:
            worst = max(worst, float(arr.max()))
    return worst


# ----------------------------------------------------------------------
# solver


@dataclass
class SolveReport:
    status: str  # success | max_iterations | infeasible
    iterations: int
    inner_iterations: int
    max_violation: float
    cost: float
    stationarity: float
    active_counts: dict[str, int] = field(default_factory=dict)


class _Residuals:
    """Evaluates stacked residuals and the penalty-weighted gradient.

    Keeps the (family, step) bookkeeping needed to push per-residual
    penalty weights back onto the (N, 2) support points.
    """

    def __init__(self, cs: ConstraintSet, n: int, dt: float):
        self.cs = cs
        self.n = n
        self.dt = dt
        self.D2 = fd_matrix(n, dt, 2)
        self.families: list[str] = []
        if cs.boundary_left is not None:
            self.families.append("fsbl")
        if cs.boundary_right is not None:
            self.families.append("fsbr")
        if cs.obstacles:
            self.families.append("dyn")
        if cs.corridor is not None and cs.path is not None:
            self.families.append("st")
        if cs.a_max is not None:
            self.families.append("acc")
        # stack per-step polygons once so evaluation vectorizes over steps
        self._stacked: list[np.ndarray] = []
        for obs in cs.obstacles:
            polys = obs.polygons
            idx = np.minimum(np.arange(n), len(polys) - 1)
            self._stacked.append(np.stack([polys[i] for i in idx]))

    @property
    def size(self) -> int:
        n, cs = self.n, self.cs
        total = 0
        for fam in self.families:
            if fam in ("fsbl", "fsbr", "acc"):
                total += n
            elif fam == "dyn":
                total += n * len(cs.obstacles)
            elif fam == "st":
                total += 2 * n
        return total

    def evaluate(self, X: np.ndarray) -> tuple[np.ndarray, list]:
        """Return stacked residuals plus per-family gradient context."""
        cs, n = self.cs, self.n
        parts = []
        ctx = []
        for fam in self.families:
            if fam in ("fsbl", "fsbr"):
                boundary = cs.boundary_left if fam == "fsbl" else cs.boundary_right
                _, d, idx = boundary.project_many(X)
                clearance = -d if fam == "fsbl" else d
                parts.append(cs.radius - clearance)
                normals = np.column_stack(
                    (-boundary._dir[idx, 1], boundary._dir[idx, 0])
                )
                sign = 1.0 if fam == "fsbl" else -1.0
                ctx.append((fam, sign * normals))
            elif fam == "dyn":
                grads = []
                for stacked in self._stacked:
                    dist, grad = pseudo_distance_batch(X, stacked)
                    parts.append(cs.radius - dist)
                    grads.append(-grad)
                ctx.append((fam, grads))
            elif fam == "st":
                s, _, idx = cs.path.project_many(X)
                s_min, s_max = cs.corridor
                parts.append(s_min - s)
                parts.append(s - s_max)
                tangents = cs.path._dir[idx]
                ctx.append((fam, tangents))
            elif fam == "acc":
                acc = self.D2 @ X
                parts.append(np.einsum("ij,ij->i", acc, acc) - cs.a_max**2)
                ctx.append((fam, acc))
        return np.concatenate(parts) if parts else np.empty(0), ctx

    def weighted_gradient(self, w: np.ndarray, ctx: list) -> np.ndarray:
        """Sum of ``w_j * grad h_j`` over all residuals, shape (N, 2)."""
        n = self.n
        G = np.zeros((n, 2))
        pos = 0
        for fam, data in ctx:
            if fam in ("fsbl", "fsbr"):
                G += w[pos : pos + n, None] * data
                pos += n
            elif fam == "dyn":
                for g in data:
                    G += w[pos : pos + n, None] * g
                    pos += n
            elif fam == "st":
                G += -w[pos : pos + n, None] * data
                pos += n
                G += w[pos : pos + n, None] * data
                pos += n
            elif fam == "acc":
                G += 2.0 * self.D2.T @ (w[pos : pos + n, None] * data)
                pos += n
        return G

    def gradient_rows(self, ctx: list, active: np.ndarray) -> np.ndarray:
        """Jacobian rows of the active residuals over the free variables.

        Column layout is ``[x_2..x_{n-1}, y_2..y_{n-1}]`` (pinned points
        eliminated). Each row holds the frozen linearization of one
        residual: the nearest feature of its distance function at the
        current iterate.
        """
        n = self.n
        nf = n - 2
        rows = np.zeros((int(active.sum()), 2 * nf))
        out_row = 0
        pos = 0

        def emit_pointwise(grads):
            nonlocal out_row
            for i in range(n):
                if not active[pos + i]:
                    continue
                if i >= 2:
                    rows[out_row, i - 2] = grads[i, 0]
                    rows[out_row, nf + i - 2] = grads[i, 1]
                out_row += 1

        for fam, data in ctx:
            if fam in ("fsbl", "fsbr"):
                emit_pointwise(data)
                pos += n
            elif fam == "dyn":
                for g in data:
                    emit_pointwise(g)
                    pos += n
            elif fam == "st":
                emit_pointwise(-data)
                pos += n
                emit_pointwise(data)
                pos += n
            elif fam == "acc":
                for i in range(n):
                    if not active[pos + i]:
                        continue
                    stencil = self.D2[i]
                    rows[out_row, :nf] = 2.0 * stencil[2:] * data[i, 0]
                    rows[out_row, nf:] = 2.0 * stencil[2:] * data[i, 1]
                    out_row += 1
                pos += n
        return rows

    def split(self, h: np.ndarray) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        pos = 0
        n = self.n
        for fam in self.families:
            if fam in ("fsbl", "fsbr", "acc"):
                out[fam] = h[pos : pos + n]
                pos += n
            elif fam == "dyn":
                m = n * len(self.cs.obstacles)
                out[fam] = h[pos : pos + m]
                pos += m
            elif fam == "st":
                out[fam] = h[pos : pos + 2 * n]
                pos += 2 * n
        return out


def solve(
    behavior_points,
    constraints: ConstraintSet,
    weights: CostWeights,
    dt: float,
    pinned=None,
    warm_start=None,
    tol_h: float = 1e-3,
    tol_g: float = 1e-4,
    max_outer: int = 50,
    max_inner: int = 100,
    rho0: float = 100.0,
    rho_growth: float = 8.0,
    diag_rows: list | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Solve the central problem for one behavior trajectory.

    The first two support points are pinned (current state continuity);
    they default to the first two behavior points. Returns the optimized
    (N, 2) points and a report; on ``infeasible`` status the points are the
    best iterate found.
    """
    Xb = np.asarray(behavior_points, dtype=float)
    n = len(Xb)
    pin = np.asarray(pinned, dtype=float) if pinned is not None else Xb[:2].copy()
    Q = QuadraticCost(n, dt, weights)
    evaluator = _Residuals(constraints, n, dt)

    def report_for(X, status, outer, inner, stat):
        h, _ = evaluator.evaluate(X)
        viol = float(h.max()) if h.size else 0.0
        counts = {
            fam: int(np.sum(arr > -tol_h))
            for fam, arr in evaluator.split(h).items()
        }
        return SolveReport(
            status=status,
            iterations=outer,
            inner_iterations=inner,
            max_violation=max(viol, 0.0),
            cost=Q.value(X, Xb),
            stationarity=stat,
            active_counts=counts,
        )

    # fast path: the exact unconstrained minimizer, kept when feasible
    X0 = Q.solve_pinned(Xb, pin)
    h0, _ = evaluator.evaluate(X0)
    if h0.size == 0 or h0.max() <= 0.0:
        return X0, report_for(X0, "success", 0, 0, 0.0)

    m = evaluator.size
    lam = np.zeros(m)
    rho = float(rho0)
    X = np.asarray(warm_start, dtype=float).copy() if warm_start is not None else Xb.copy()
    X[:2] = pin
    nf = n - 2

    # factored quadratic in delta form: J = |Af x_free - b_c|^2 per coordinate
    Af = Q._A[:, 2:]
    b_cols = np.empty((Q._A.shape[0], 2))
    for c in range(2):
        b_cols[:, c] = np.concatenate(
            (np.sqrt(weights.w_b) * Xb[:, c], np.zeros(3 * n))
        ) - Q._A[:, :2] @ pin[:, c]

    def al_value(Xc, h):
        shifted = lam / rho + h
        pen = 0.5 * rho * float(np.sum(np.maximum(shifted, 0.0) ** 2 - (lam / rho) ** 2))
        return Q.value(Xc, Xb) + pen

    best_feasible = None
    best_cost = np.inf
    total_inner = 0
    stationarity = np.inf
    prev_viol = np.inf

    AtA = Af.T @ Af
    stalled_outers = 0

    h, ctx = evaluator.evaluate(X)
    for outer in range(1, max_outer + 1):
        # inner: Gauss-Newton sequential least squares on the augmented
        # objective; each iteration freezes the active nearest features of
        # the distance constraints in their linearized rows. The step solve
        # uses the Gauss-Newton normal equations: their accuracy is bounded
        # below by the behavior-weight curvature, which is ample for the
        # 1e-4 m step tolerance.
        for _ in range(max_inner):
            total_inner += 1
            f_cur = al_value(X, h)
            shifted = lam / rho + h
            active = shifted > 0.0
            r_quad = Af @ X[2:] - b_cols  # (4n, 2)
            K = np.zeros((2 * nf, 2 * nf))
            K[:nf, :nf] = AtA
            K[nf:, nf:] = AtA
            rhs = -np.concatenate((Af.T @ r_quad[:, 0], Af.T @ r_quad[:, 1]))
            if np.any(active):
                G = evaluator.gradient_rows(ctx, active)
                K += rho * G.T @ G
                rhs -= rho * G.T @ shifted[active]
            try:
                c_factor = cho_factor(K, lower=True)
                delta = cho_solve(c_factor, rhs)
            except np.linalg.LinAlgError:
                delta = np.linalg.lstsq(K, rhs, rcond=None)[0]
            step = np.column_stack((delta[:nf], delta[nf:]))
            alpha = 1.0
            accepted = False
            for _ in range(15):
                X_try = X.copy()
                X_try[2:] += alpha * step
                h_try, ctx_try = evaluator.evaluate(X_try)
                if al_value(X_try, h_try) <= f_cur - 1e-14:
                    X, h, ctx = X_try, h_try, ctx_try
                    accepted = True
                    break
                alpha *= 0.5
            step_size = float(np.abs(alpha * step).max()) if accepted else 0.0
            stationarity = step_size
            if not accepted or step_size < 0.05 * tol_g:
                break

        viol = float(h.max()) if h.size else 0.0
        J = Q.value(X, Xb)
        if diag_rows is not None:
            diag_rows.append((outer, J, max(viol, 0.0)))
        if viol <= tol_h and J < best_cost:
            best_feasible = X.copy()
            best_cost = J
        if viol <= tol_h and stationarity <= tol_g:
            return X, report_for(X, "success", outer, total_inner, stationarity)
        lam = np.maximum(0.0, lam + rho * h)
        if viol > 0.25 * prev_viol:
            rho = min(rho * rho_growth, 1e8)
        # no measurable progress on the violation: a locally infeasible
        # basin, bail out instead of burning the full iteration budget
        if viol > tol_h and viol > prev_viol * 0.99:
            stalled_outers += 1
            if stalled_outers >= 4:
                break
        else:
            stalled_outers = 0
        prev_viol = max(viol, 1e-12)

    if best_feasible is not None:
        return best_feasible, report_for(
            best_feasible, "max_iterations", max_outer, total_inner, stationarity
        )
    return X, report_for(X, "infeasible", max_outer, total_inner, stationarity)
