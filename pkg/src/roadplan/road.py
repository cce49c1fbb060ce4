"""Lane geometry: polylines with arc-length parametrization, Frenet
conversions, discrete curvature, and curvature-limited velocity profiles.

Lanes are represented by a centerline polyline plus left/right free-space
boundary polylines. All polylines are resampled to a uniform spacing on
construction so that finite-difference curvature is stable and projections
are cheap to vectorize.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RESAMPLE_SPACING = 0.5  # [m] uniform vertex spacing applied on lane construction


class Polyline:
    """Ordered 2-D points with cumulative arc length.

    Invariants: at least two points, consecutive points distinct, arc
    length strictly increasing with ``s[0] == 0``.
    """

    __slots__ = ("points", "s", "_seg", "_seg_len", "_dir", "_vertex_kappa")

    def __init__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("polyline needs >= 2 two-dimensional points")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 0.0):
            raise ValueError("consecutive polyline points must be distinct")
        self.points = pts
        self._seg = seg
        self._seg_len = seg_len
        self._dir = seg / seg_len[:, None]
        self.s = np.concatenate(([0.0], np.cumsum(seg_len)))
        self._vertex_kappa = None

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def resampled(self, spacing: float = RESAMPLE_SPACING) -> "Polyline":
        """Return a copy with vertices at (approximately) uniform spacing.

        Endpoints are preserved exactly; interior vertices are linear
        interpolants of the original geometry.
        """
        n = max(2, int(round(self.length / spacing)) + 1)
        s_new = np.linspace(0.0, self.length, n)
        x = np.interp(s_new, self.s, self.points[:, 0])
        y = np.interp(s_new, self.s, self.points[:, 1])
        return Polyline(np.column_stack((x, y)))

    # ------------------------------------------------------------------
    # projection / Frenet conversions

    def project(self, point) -> tuple[float, float, int]:
        """Project a point onto the polyline.

        Returns ``(s, d, segment_index)`` where ``s`` is the clamped arc
        length of the foot point and ``d`` the signed lateral offset,
        positive to the left of the direction of travel. Endpoints clamp:
        ``s`` never leaves ``[0, length]``.
        """
        s, d, idx = self.project_many(np.asarray(point, dtype=float)[None, :])
        return float(s[0]), float(d[0]), int(idx[0])

    def project_many(self, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized :meth:`project` for an (M, 2) array of points."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.points[:-1]
        rel = p[:, None, :] - a[None, :, :]  # (M, S, 2)
        t = np.einsum("msk,sk->ms", rel, self._seg) / (self._seg_len**2)
        t = np.clip(t, 0.0, 1.0)
        foot = a[None, :, :] + t[..., None] * self._seg[None, :, :]
        delta = p[:, None, :] - foot
        dist2 = np.einsum("msk,msk->ms", delta, delta)
        idx = np.argmin(dist2, axis=1)
        rows = np.arange(p.shape[0])
        t_best = t[rows, idx]
        foot_best = foot[rows, idx]
        s = self.s[idx] + t_best * self._seg_len[idx]
        dvec = p - foot_best
        d = self._dir[idx, 0] * dvec[:, 1] - self._dir[idx, 1] * dvec[:, 0]
        return s, d, idx

    def distance_many(self, points) -> np.ndarray:
        """Euclidean distance from each point to the polyline (unsigned)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.points[:-1]
        rel = p[:, None, :] - a[None, :, :]
        t = np.einsum("msk,sk->ms", rel, self._seg) / (self._seg_len**2)
        t = np.clip(t, 0.0, 1.0)
        foot = a[None, :, :] + t[..., None] * self._seg[None, :, :]
        delta = p[:, None, :] - foot
        dist2 = np.einsum("msk,msk->ms", delta, delta)
        return np.sqrt(dist2.min(axis=1))

    def _segment_of(self, s: float) -> tuple[int, float]:
        s = float(np.clip(s, 0.0, self.length))
        k = int(np.searchsorted(self.s, s, side="right") - 1)
        k = min(max(k, 0), len(self._seg_len) - 1)
        return k, s - self.s[k]

    def point_at(self, s: float) -> np.ndarray:
        """Position on the polyline at arc length ``s`` (clamped)."""
        k, ds = self._segment_of(s)
        return self.points[k] + ds * self._dir[k]

    def points_at(self, s) -> np.ndarray:
        s_arr = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        x = np.interp(s_arr, self.s, self.points[:, 0])
        y = np.interp(s_arr, self.s, self.points[:, 1])
        return np.column_stack((x, y))

    def tangent_at(self, s: float) -> np.ndarray:
        """Unit tangent of the segment containing ``s``."""
        k, _ = self._segment_of(s)
        return self._dir[k].copy()

    def heading_at(self, s: float) -> float:
        t = self.tangent_at(s)
        return float(np.arctan2(t[1], t[0]))

    def slice(self, s_lo: float, s_hi: float) -> tuple["Polyline", float]:
        """Sub-polyline covering ``[s_lo, s_hi]`` (clamped).

        Returns the piece plus the arc offset of its start, so callers can
        convert between local and original arc length.
        """
        s_lo = float(np.clip(s_lo, 0.0, self.length))
        s_hi = float(np.clip(s_hi, 0.0, self.length))
        if s_hi - s_lo < 1.0:
            s_hi = min(s_lo + 1.0, self.length)
            s_lo = max(s_hi - 1.0, 0.0)
        first = int(np.searchsorted(self.s, s_lo, side="right"))
        last = int(np.searchsorted(self.s, s_hi, side="left"))
        pts = [self.point_at(s_lo)]
        for k in range(first, last):
            pts.append(self.points[k])
        end = self.point_at(s_hi)
        if np.hypot(*(end - pts[-1])) > 1e-9:
            pts.append(end)
        return Polyline(np.asarray(pts)), s_lo

    def frenet_to_cartesian(self, s: float, d: float) -> np.ndarray:
        """Inverse of :meth:`project` up to polyline discretization.

        Raises ``ValueError`` for ``s`` outside ``[0, length]``.
        """
        if s < -1e-9 or s > self.length + 1e-9:
            raise ValueError(f"arc length {s} outside [0, {self.length}]")
        k, ds = self._segment_of(s)
        base = self.points[k] + ds * self._dir[k]
        normal = np.array([-self._dir[k, 1], self._dir[k, 0]])
        return base + d * normal

    # ------------------------------------------------------------------
    # curvature

    def vertex_curvature(self) -> np.ndarray:
        """Signed Menger curvature at every vertex (positive = left turn).

        Endpoint vertices copy their nearest interior value; collinear
        triples give exactly zero.
        """
        if self._vertex_kappa is None:
            pts = self.points
            kappa = np.zeros(len(pts))
            if len(pts) >= 3:
                a, b, c = pts[:-2], pts[1:-1], pts[2:]
                ab = b - a
                bc = c - b
                ac = c - a
                cross = ab[:, 0] * bc[:, 1] - ab[:, 1] * bc[:, 0]
                denom = (
                    np.hypot(ab[:, 0], ab[:, 1])
                    * np.hypot(bc[:, 0], bc[:, 1])
                    * np.hypot(ac[:, 0], ac[:, 1])
                )
                inner = np.zeros_like(cross)
                ok = denom > 1e-12
                inner[ok] = 2.0 * cross[ok] / denom[ok]
                kappa[1:-1] = inner
                kappa[0] = inner[0]
                kappa[-1] = inner[-1]
            self._vertex_kappa = kappa
        return self._vertex_kappa

    def curvature_at(self, s) -> np.ndarray | float:
        """Curvature linearly interpolated between vertex values."""
        kappa = self.vertex_curvature()
        s_arr = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        out = np.interp(s_arr, self.s, kappa)
        return float(out) if np.isscalar(s) else out


def offset_polyline(line: Polyline, offset: float) -> Polyline:
    """Shift a polyline laterally by ``offset`` (positive = left).

    Vertex normals average the adjacent segment normals, which is adequate
    for the gentle curvatures of road geometry.
    """
    d = line._dir
    seg_normals = np.column_stack((-d[:, 1], d[:, 0]))
    normals = np.empty_like(line.points)
    normals[0] = seg_normals[0]
    normals[-1] = seg_normals[-1]
    if len(seg_normals) > 1:
        mid = seg_normals[:-1] + seg_normals[1:]
        norm = np.hypot(mid[:, 0], mid[:, 1])
        norm[norm < 1e-12] = 1.0
        normals[1:-1] = mid / norm[:, None]
    return Polyline(line.points + offset * normals)


@dataclass
class VelocityProfile:
    """Target speeds along a path, parametrized by arc length.

    Between samples, the squared speed is interpolated linearly so that
    the implied acceleration bound ``|v[i+1]^2 - v[i]^2| <= 2 a ds`` is
    exactly checkable.
    """

    s: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if np.any(self.v <= 0.0):
            raise ValueError("velocity profile must be strictly positive")

    def value(self, s) -> np.ndarray | float:
        v2 = np.interp(np.asarray(s, dtype=float), self.s, self.v**2)
        out = np.sqrt(v2)
        return float(out) if np.isscalar(s) else out


def velocity_profile(
    line: Polyline,
    speed_limit,
    a_lat_max: float,
    a_lon_comf: float,
) -> VelocityProfile:
    """Curvature-limited velocity profile along a polyline.

    Pointwise cap ``v = min(limit, sqrt(a_lat_max / |kappa|))`` followed by
    a backward pass limiting deceleration and a forward pass limiting
    acceleration, both to ``a_lon_comf``, performed on squared speeds.
    ``speed_limit`` may be a scalar or a per-vertex array.
    """
    if a_lat_max <= 0.0 or a_lon_comf <= 0.0:
        raise ValueError("acceleration bounds must be positive")
    kappa = np.abs(line.vertex_curvature())
    limit = np.broadcast_to(np.asarray(speed_limit, dtype=float), kappa.shape).copy()
    v = limit.copy()
    curved = kappa > 1e-9
    v[curved] = np.minimum(v[curved], np.sqrt(a_lat_max / kappa[curved]))

    v2 = v**2
    ds = np.diff(line.s)
    for i in range(len(v2) - 2, -1, -1):  # backward: bounded deceleration
        v2[i] = min(v2[i], v2[i + 1] + 2.0 * a_lon_comf * ds[i])
    for i in range(len(v2) - 1):  # forward: bounded acceleration
        v2[i + 1] = min(v2[i + 1], v2[i] + 2.0 * a_lon_comf * ds[i])
    return VelocityProfile(line.s.copy(), np.sqrt(v2))


@dataclass
class Lane:
    """One lane: centerline, free-space boundaries, and routing metadata.

    ``lane_type`` is one of ``normal``, ``roundabout`` or
    ``intersection_approach``; the decision layer gates lane changes on it.
    """

    lane_id: str
    centerline: Polyline
    boundary_left: Polyline
    boundary_right: Polyline
    speed_limit: float
    successors: tuple[str, ...] = ()
    lane_type: str = "normal"
    left_neighbor: str | None = None
    right_neighbor: str | None = None

    def __post_init__(self):
        if self.speed_limit <= 0.0:
            raise ValueError("speed limit must be positive")

    @staticmethod
    def build(
        lane_id: str,
        centerline_points,
        *,
        width: float | None = None,
        boundary_left=None,
        boundary_right=None,
        speed_limit: float = 13.89,
        successors=(),
        lane_type: str = "normal",
        left_neighbor: str | None = None,
        right_neighbor: str | None = None,
    ) -> "Lane":
        """Construct a lane, resampling all polylines to uniform spacing.

        Boundaries default to the centerline offset by ``width / 2``.
        """
        center = Polyline(centerline_points).resampled()
        if boundary_left is None or boundary_right is None:
            if width is None:
                raise ValueError("either width or explicit boundaries required")
            left = offset_polyline(center, width / 2.0)
            right = offset_polyline(center, -width / 2.0)
        else:
            left = Polyline(boundary_left).resampled()
            right = Polyline(boundary_right).resampled()
        return Lane(
            lane_id=lane_id,
            centerline=center,
            boundary_left=left,
            boundary_right=right,
            speed_limit=float(speed_limit),
            successors=tuple(successors),
            lane_type=lane_type,
            left_neighbor=left_neighbor,
            right_neighbor=right_neighbor,
        )

    def boundary_sides_consistent(self, n_samples: int = 25) -> bool:
        """True when the boundaries lie on opposite sides of the centerline."""
        s_samples = np.linspace(0.0, self.centerline.length, n_samples)
        pts = self.centerline.points_at(s_samples)
        _, d_left, _ = self.boundary_left.project_many(pts)
        _, d_right, _ = self.boundary_right.project_many(pts)
        # centerline right of left boundary (d < 0), left of right boundary
        return bool(np.all(d_left < 0.0) and np.all(d_right > 0.0))

    def velocity_profile(self, a_lat_max: float, a_lon_comf: float) -> VelocityProfile:
        return velocity_profile(self.centerline, self.speed_limit, a_lat_max, a_lon_comf)


class Route:
    """Concatenation of lanes into one contiguous planning path.

    Exposes a composite centerline and boundary polylines plus the arc
    offset of every member lane, so that per-lane annotations (conflict
    points, speed limits) can be mapped onto route arc length.
    """

    def __init__(self, lanes: list[Lane]):
        if not lanes:
            raise ValueError("route needs at least one lane")
        self.lanes = list(lanes)
        self.offsets: dict[str, float] = {}
        center_pts = []
        left_pts = []
        right_pts = []
        limits = []
        offset = 0.0
        for i, lane in enumerate(self.lanes):
            self.offsets[lane.lane_id] = offset
            cpts = lane.centerline.points
            lpts = lane.boundary_left.points
            rpts = lane.boundary_right.points
            if i > 0:
                cpts = cpts[1:]
                lpts = lpts[1:]
                rpts = rpts[1:]
            center_pts.append(cpts)
            left_pts.append(lpts)
            right_pts.append(rpts)
            limits.append(np.full(len(cpts), lane.speed_limit))
            offset += lane.centerline.length
        self.centerline = Polyline(np.vstack(center_pts))
        self.boundary_left = Polyline(np.vstack(left_pts))
        self.boundary_right = Polyline(np.vstack(right_pts))
        self._vertex_limits = np.concatenate(limits)

    @property
    def length(self) -> float:
        return self.centerline.length

    def lane_offset(self, lane_id: str) -> float:
        return self.offsets[lane_id]

    def contains_lane(self, lane_id: str) -> bool:
        return lane_id in self.offsets

    def lane_at(self, s: float) -> Lane:
        s = float(np.clip(s, 0.0, self.length))
        chosen = self.lanes[0]
        for lane in self.lanes:
            if self.offsets[lane.lane_id] <= s + 1e-9:
                chosen = lane
        return chosen

    def speed_limit_at(self, s: float) -> float:
        return self.lane_at(s).speed_limit

    def velocity_profile(self, a_lat_max: float, a_lon_comf: float) -> VelocityProfile:
        return velocity_profile(
            self.centerline, self._vertex_limits, a_lat_max, a_lon_comf
        )


@dataclass
class Conflict:
    """A crossing/merging point between two lanes, in each lane's arc length."""

    lane_a: str
    s_a: float
    lane_b: str
    s_b: float


class RoadMap:
    """All lanes of a scenario plus the conflict-point annotations."""

    def __init__(self, lanes, conflicts=()):
        self.lanes: dict[str, Lane] = {lane.lane_id: lane for lane in lanes}
        self.conflicts: list[Conflict] = list(conflicts)
        self._route_cache: dict[tuple[str, ...], Route] = {}
        self._profile_cache: dict[tuple, VelocityProfile] = {}

    def lane(self, lane_id: str) -> Lane:
        return self.lanes[lane_id]

    def route(self, lane_ids) -> Route:
        key = tuple(lane_ids)
        if key not in self._route_cache:
            self._route_cache[key] = Route([self.lanes[i] for i in key])
        return self._route_cache[key]

    def profile(self, route: Route, a_lat_max: float, a_lon_comf: float) -> VelocityProfile:
        key = (tuple(l.lane_id for l in route.lanes), a_lat_max, a_lon_comf)
        if key not in self._profile_cache:
            self._profile_cache[key] = route.velocity_profile(a_lat_max, a_lon_comf)
        return self._profile_cache[key]

    def match(self, position, heading: float | None = None):
        """Nearest lane by true distance; returns ``(lane_id, s, d)``.

        Candidates whose tangent opposes ``heading`` are rejected, as are
        positions farther than one lane width off every centerline. The
        Euclidean distance (not the perpendicular offset) decides, so a
        position beyond a lane's end never matches that lane. ``None``
        when nothing matches.
        """
        pos = np.asarray(position, dtype=float)
        best = None
        best_dist = np.inf
        for lane in self.lanes.values():
            dist = float(lane.centerline.distance_many(pos[None, :])[0])
            if dist > 3.5 or dist >= best_dist:
                continue
            s, d, _ = lane.centerline.project(pos)
            if heading is not None:
                tangent = lane.centerline.tangent_at(s)
                if tangent[0] * np.cos(heading) + tangent[1] * np.sin(heading) <= 0.0:
                    continue
            best = (lane.lane_id, s, d)
            best_dist = dist
        return best

    def route_options(self, start_lane: str, min_length: float) -> list[list[str]]:
        """All successor branches from ``start_lane`` covering ``min_length``.

        Branches stop early at leaves; ordering is deterministic (successor
        declaration order, depth first).
        """
        options: list[list[str]] = []

        def walk(path: list[str], covered: float):
            lane = self.lanes[path[-1]]
            covered += lane.centerline.length
            succs = [s for s in lane.successors if s in self.lanes and s not in path]
            if covered >= min_length or not succs:
                options.append(path)
                return
            for nxt in succs:
                walk(path + [nxt], covered)

        walk([start_lane], 0.0)
        return options

    def conflicts_between(self, route_a: Route, route_b: Route) -> list[tuple[float, float]]:
        """Conflict points shared by two routes, as (s_on_a, s_on_b) pairs."""
        out = []
        for c in self.conflicts:
            pairs = [(c.lane_a, c.s_a, c.lane_b, c.s_b), (c.lane_b, c.s_b, c.lane_a, c.s_a)]
            for la, sa, lb, sb in pairs:
                if route_a.contains_lane(la) and route_b.contains_lane(lb):
                    out.append((route_a.lane_offset(la) + sa, route_b.lane_offset(lb) + sb))
        return sorted(set(out))


@dataclass
class VehicleState:
    """Pose, speed, acceleration and body dimensions of one participant."""

    x: float
    y: float
    heading: float
    v: float
    accel: float = 0.0
    length: float = 4.5
    width: float = 1.9

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def footprint(self) -> np.ndarray:
        """Body rectangle corners in world frame, counter-clockwise."""
        c, s = np.cos(self.heading), np.sin(self.heading)
        hl, hw = self.length / 2.0, self.width / 2.0
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + self.position
