"""LiDAR contour objects and their image-space representation.

The scanner's ECU delivers per-object contour polylines on a horizontal
plane at the sensor mount height (robot frame).  To compare an object
against camera detections, the contour is lifted to a bottom and a top
polyline (a fixed standard object height covers the tallest roadwork
equipment including warning lights), both are projected through the
camera model, clipped to the image, and enclosed in a pixel box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import (
    CameraIntrinsics,
    PixelBox,
    Point2,
    Pose2D,
    RigidTransform3D,
    project_to_image,
)

# Height ascribed to every contour object when extruding the upper line,
# meters: tallest common roadwork objects plus a mounted warning light.
ASSUMED_OBJECT_HEIGHT = 1.60


@dataclass(frozen=True)
class ContourObject:
    """One ECU object: stable id plus an ordered contour polyline (robot frame)."""

    object_id: int
    points: tuple[Point2, ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("contour must contain at least one point")
        pts = tuple((float(x), float(y)) for x, y in self.points)
        for x, y in pts:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("contour points must be finite")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class SensorModelParams:
    """Camera model plus the LiDAR scan plane height."""

    intrinsics: CameraIntrinsics
    extrinsic: RigidTransform3D  # robot frame -> camera frame
    sensor_mount_height: float = 0.0
    object_height: float = ASSUMED_OBJECT_HEIGHT


@dataclass(frozen=True)
class ContourBoxImage:
    """Image-space stand-in for a contour object, used for detector matching."""

    object_id: int
    box: PixelBox
    bottom_line: tuple[Point2, ...]
    range: float
    clipped: bool = False


def object_range(contour: ContourObject) -> float:
    """Closest contour point distance from the robot origin, meters."""
    return min(math.hypot(x, y) for x, y in contour.points)


def clip_to_image_boundary(
    polyline: Sequence[Point2], width: float, height: float
) -> tuple[list[Point2], bool]:
    """Clip a pixel polyline to [0, width] x [0, height].

    Vertices inside the image are kept exactly; every edge crossing a
    border contributes the exact border intersection instead of the
    outside vertex.  Returns the clipped polyline and whether any
    clipping occurred.  A polyline fully outside clips to nothing.
    """
    def inside(p: Point2) -> bool:
        return 0.0 <= p[0] <= width and 0.0 <= p[1] <= height

    pts = [(float(u), float(v)) for u, v in polyline]
    if not pts:
        return [], False
    if len(pts) == 1:
        return (pts, False) if inside(pts[0]) else ([], True)

    out: list[Point2] = []
    clipped = False

    def push(p: Point2) -> None:
        if not out or out[-1] != p:
            out.append(p)

    for a, b in zip(pts[:-1], pts[1:]):
        seg = _clip_segment(a, b, width, height)
        if seg is None:
            clipped = True
            continue
        (ca, cb), touched = seg
        clipped = clipped or touched
        push(ca)
        push(cb)
    return out, clipped


def _clip_segment(
    a: Point2, b: Point2, width: float, height: float
) -> tuple[tuple[Point2, Point2], bool] | None:
    """Liang-Barsky clip of segment a-b against the image rectangle."""
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-dx, a[0] - 0.0),
        (dx, width - a[0]),
        (-dy, a[1] - 0.0),
        (dy, height - a[1]),
    ):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        t = q / p
        if p < 0.0:
            if t > t1:
                return None
            if t > t0:
                t0 = t
        else:
            if t < t0:
                return None
            if t < t1:
                t1 = t
    ca = (a[0] + t0 * dx, a[1] + t0 * dy)
    cb = (a[0] + t1 * dx, a[1] + t1 * dy)
    return (ca, cb), (t0 > 0.0 or t1 < 1.0)


def _project_polyline(
    points_3d: np.ndarray, sensor: SensorModelParams
) -> list[Point2]:
    cam = sensor.extrinsic.apply(points_3d)
    projected = []
    for p in cam:
        px = project_to_image(p, sensor.intrinsics)
        if px is not None:
            projected.append(px)
    return projected


def build_contour_box(
    contour: ContourObject, sensor: SensorModelParams
) -> ContourBoxImage | None:
    """Project a contour object into the image and enclose it in a box.

    Returns None when no contour point projects in front of the camera,
    or when the projection falls entirely outside the image; the caller
    keeps such objects in world-frame tracking only.
    """
    pts = np.asarray(contour.points, dtype=float)
    z_bottom = np.full((len(pts), 1), sensor.sensor_mount_height)
    z_top = np.full((len(pts), 1), sensor.sensor_mount_height + sensor.object_height)
    bottom_px = _project_polyline(np.hstack([pts, z_bottom]), sensor)
    top_px = _project_polyline(np.hstack([pts, z_top]), sensor)
    if not bottom_px and not top_px:
        return None

    w = float(sensor.intrinsics.width)
    h = float(sensor.intrinsics.height)
    bottom_clip, bottom_flag = clip_to_image_boundary(bottom_px, w, h)
    top_clip, top_flag = clip_to_image_boundary(top_px, w, h)
    visible = bottom_clip + top_clip
    if not visible:
        return None
    return ContourBoxImage(
        object_id=contour.object_id,
        box=PixelBox.from_points(visible),
        bottom_line=tuple(bottom_clip),
        range=object_range(contour),
        clipped=bottom_flag or top_flag,
    )


def contour_to_world(contour: ContourObject, pose: Pose2D) -> list[Point2]:
    """Rigidly map a robot-frame contour onto the local-world ground plane."""
    c = math.cos(pose.heading)
    s = math.sin(pose.heading)
    return [
        (c * x - s * y + pose.x, s * x + c * y + pose.y)
        for x, y in contour.points
    ]
