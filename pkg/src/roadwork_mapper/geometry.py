"""Frames, intrinsics and planar geometry primitives.

Coordinate conventions used throughout the pipeline:

  robot frame    +x forward, +y left, +z up, origin on the ground under
                 the rear axle.  LiDAR contours arrive in this frame.
  camera frame   +z forward (optical axis), +x right, +y down.
  image frame    u right, v down, origin at the top-left pixel corner.
  local world    2D ground plane frame fixed at the start of a session;
                 vehicle poses from odometry are expressed here.
  UTM            easting/northing meters; reached from local world by a
                 single rotation + translation (no geodesic correction).

Angles are radians, counter-clockwise positive.  Pose headings are
normalized to (-pi, pi].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

Point2 = tuple[float, float]


def normalize_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - angle) % (2.0 * math.pi)


@dataclass(frozen=True)
class Pose2D:
    """Vehicle pose on the local-world ground plane."""

    x: float
    y: float
    heading: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def position(self) -> Point2:
        return (self.x, self.y)

    def heading_vector(self) -> Point2:
        return (math.cos(self.heading), math.sin(self.heading))


@dataclass(frozen=True)
class RigidTransform3D:
    """Rotation + translation mapping points between 3D frames."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9):
            raise ValueError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation matrix determinant must be +1")

    @classmethod
    def identity(cls) -> "RigidTransform3D":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) array of points."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform3D":
        r_inv = self.rotation.T
        return RigidTransform3D(r_inv, -(r_inv @ self.translation))

    def compose(self, other: "RigidTransform3D") -> "RigidTransform3D":
        """Return the transform equivalent to applying ``other`` first."""
        return RigidTransform3D(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model at the detector's working resolution."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


# Points closer than this along the optical axis do not project.
MIN_PROJECTION_DEPTH = 1e-6


def project_to_image(point_camera: Sequence[float], intrinsics: CameraIntrinsics) -> Point2 | None:
    """Project a camera-frame point to pixels; None if at/behind the camera."""
    x, y, z = float(point_camera[0]), float(point_camera[1]), float(point_camera[2])
    if z <= MIN_PROJECTION_DEPTH:
        return None
    return (intrinsics.fx * x / z + intrinsics.cx, intrinsics.fy * y / z + intrinsics.cy)


@dataclass(frozen=True)
class PixelBox:
    """Axis-aligned image box, pixel units."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError("box corners are inverted")

    @classmethod
    def from_points(cls, points: Iterable[Point2]) -> "PixelBox":
        pts = list(points)
        if not pts:
            raise ValueError("cannot build a box from zero points")
        us = [p[0] for p in pts]
        vs = [p[1] for p in pts]
        return cls(min(us), min(vs), max(us), max(vs))

    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def clamped(self, width: float, height: float) -> "PixelBox":
        return PixelBox(
            min(max(self.x_min, 0.0), width),
            min(max(self.y_min, 0.0), height),
            min(max(self.x_max, 0.0), width),
            min(max(self.y_max, 0.0), height),
        )


def iou(a: PixelBox, b: PixelBox) -> float:
    """Intersection over union of two boxes; 0 when the union has no area."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        inter = 0.0
    else:
        inter = ix * iy
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def _cross(o: Point2, a: Point2, b: Point2) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Sequence[Point2]) -> list[Point2]:
    """Convex hull in CCW order, collinear interior points removed.

    Degenerate inputs are handled: one distinct point yields a single-point
    polygon, collinear inputs yield the two extreme points.
    """
    unique = sorted(set((float(p[0]), float(p[1])) for p in points))
    if not unique:
        raise ValueError("convex hull of empty point set")
    if len(unique) == 1:
        return unique
    if len(unique) == 2:
        return unique

    lower: list[Point2] = []
    for p in unique:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0.0:
            lower.pop()
        lower.append(p)
    upper: list[Point2] = []
    for p in reversed(unique):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0.0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:
        # All points collinear: keep the two extremes of the sorted order.
        return [unique[0], unique[-1]]
    return hull


def point_in_convex_polygon(point: Point2, hull: Sequence[Point2], tol: float = 1e-9) -> bool:
    """Membership test for a CCW convex polygon (degenerate hulls allowed)."""
    if len(hull) == 1:
        return math.dist(point, hull[0]) <= tol
    if len(hull) == 2:
        return _point_segment_distance(point, hull[0], hull[1]) <= tol
    for i in range(len(hull)):
        if _cross(hull[i], hull[(i + 1) % len(hull)], point) < -tol:
            return False
    return True


def _point_segment_distance(p: Point2, a: Point2, b: Point2) -> float:
    ab = (b[0] - a[0], b[1] - a[1])
    ap = (p[0] - a[0], p[1] - a[1])
    denom = ab[0] * ab[0] + ab[1] * ab[1]
    if denom == 0.0:
        return math.hypot(ap[0], ap[1])
    t = max(0.0, min(1.0, (ap[0] * ab[0] + ap[1] * ab[1]) / denom))
    return math.hypot(ap[0] - t * ab[0], ap[1] - t * ab[1])


def distance_to_convex_polygon(point: Point2, hull: Sequence[Point2]) -> float:
    """Distance from a point to a convex polygon; 0 inside."""
    if len(hull) == 1:
        return math.dist(point, hull[0])
    if len(hull) == 2:
        return _point_segment_distance(point, hull[0], hull[1])
    if point_in_convex_polygon(point, hull, tol=0.0):
        return 0.0
    return min(
        _point_segment_distance(point, hull[i], hull[(i + 1) % len(hull)])
        for i in range(len(hull))
    )


def point_to_axis_distance(point: Point2, axis_start: Point2, axis_end: Point2) -> float:
    """Orthogonal distance from a point to the infinite line through the axis."""
    dx = axis_end[0] - axis_start[0]
    dy = axis_end[1] - axis_start[1]
    length = math.hypot(dx, dy)
    if length == 0.0:
        raise ValueError("axis endpoints coincide")
    return abs(dx * (point[1] - axis_start[1]) - dy * (point[0] - axis_start[0])) / length


@dataclass(frozen=True)
class UtmAnchor:
    """Rigid placement of the local-world frame inside a UTM zone."""

    easting: float
    northing: float
    zone: str
    heading_offset: float = 0.0

    def __post_init__(self) -> None:
        if not (100000.0 <= self.easting < 900000.0):
            raise ValueError("anchor easting outside valid UTM range")
        if self.northing < 0.0:
            raise ValueError("anchor northing must be non-negative")


def local_to_utm(point: Point2, anchor: UtmAnchor) -> Point2:
    """Map a local-world point to UTM easting/northing."""
    c = math.cos(anchor.heading_offset)
    s = math.sin(anchor.heading_offset)
    x, y = point
    return (anchor.easting + c * x - s * y, anchor.northing + s * x + c * y)


def utm_to_local(point: Point2, anchor: UtmAnchor) -> Point2:
    """Inverse of :func:`local_to_utm`."""
    c = math.cos(anchor.heading_offset)
    s = math.sin(anchor.heading_offset)
    x = point[0] - anchor.easting
    y = point[1] - anchor.northing
    return (c * x + s * y, -s * x + c * y)
