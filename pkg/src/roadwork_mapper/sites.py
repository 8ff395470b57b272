"""Roadwork site dictionary: grouping promoted objects into measured sites.

Promoted objects are grouped by mutual separation measured in the
vehicle-trajectory frame (longitudinal along the heading, lateral
perpendicular to it).  The first object of a site keeps its full
contour; later members keep only their last contour point, which is
enough to trace a smooth site outline during the drive-by.  Sites that
were split by a late-arriving bridging object are merged, sites fully
inside another site's hull are dropped, and a site is finished once the
vehicle has driven far enough past its last detection.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .detections import BARRIER
from .geometry import (
    Point2,
    Pose2D,
    UtmAnchor,
    convex_hull,
    distance_to_convex_polygon,
    local_to_utm,
    point_to_axis_distance,
)

ContourProvider = Callable[[int], "list[Point2] | None"]


@dataclass(frozen=True)
class SeparationPolicy:
    """Maximum member separations for two objects to share a site, meters."""

    panel_panel_longitudinal: float = 12.0
    barrier_barrier_longitudinal: float = 2.0
    barrier_other_longitudinal: float = 6.0
    lateral: float = 1.5

    def longitudinal_for(self, class_a: str, class_b: str) -> float:
        a_barrier = class_a == BARRIER
        b_barrier = class_b == BARRIER
        if a_barrier and b_barrier:
            return self.barrier_barrier_longitudinal
        if a_barrier or b_barrier:
            return self.barrier_other_longitudinal
        return self.panel_panel_longitudinal


# Meters behind the vehicle within which an out-of-view member is still
# drawn as a ghost in frame annotations.
GHOST_RETENTION = 15.0

# Meters of vehicle path without member detections after which a site is
# considered finished.
FINALIZE_DISTANCE = 50.0


@dataclass
class SiteMember:
    object_id: int
    object_class: str
    points: list[Point2]  # full contour for the head member, [last point] otherwise


@dataclass
class RoadworkSite:
    site_id: int
    members: list[SiteMember]
    start_time: float
    last_detection_time: float
    arc_position: float  # vehicle arc length at the last member detection
    ghosts: list[int] = field(default_factory=list)
    finished: bool = False

    def member_ids(self) -> list[int]:
        return [m.object_id for m in self.members]

    def stored_points(self) -> list[Point2]:
        out: list[Point2] = []
        for member in self.members:
            out.extend(member.points)
        return out

    def class_counts(self) -> dict[str, int]:
        return dict(Counter(m.object_class for m in self.members))


@dataclass(frozen=True)
class SiteDimensions:
    """Length along the dominant axis and depth orthogonal to it."""

    length: float
    depth: float
    axis_start: Point2
    axis_end: Point2


def site_dimensions(site: RoadworkSite) -> SiteDimensions:
    """Measure a site from its stored points.

    The reference point is the first stored point of the head member's
    contour; length is the largest distance from it, depth the largest
    orthogonal distance from the resulting axis.
    """
    points = site.stored_points()
    first = site.members[0].points[0]
    far = max(points, key=lambda p: math.dist(first, p))
    length = math.dist(first, far)
    if length == 0.0:
        return SiteDimensions(0.0, 0.0, first, far)
    depth = max(point_to_axis_distance(p, first, far) for p in points)
    return SiteDimensions(length, depth, first, far)


@dataclass(frozen=True)
class SiteRecord:
    """Finished site in output form."""

    site_id: int
    raw_polygon: tuple[Point2, ...]
    hull_polygon: tuple[Point2, ...]
    length: float
    depth: float
    class_counts: dict[str, int]
    start_time: float
    end_time: float
    frame: str  # "utm" or "local"
    utm_zone: str | None


def _separation(
    points_a: Sequence[Point2], points_b: Sequence[Point2], heading: float
) -> tuple[float, float, float]:
    """(euclidean, longitudinal, lateral) between the nearest point pair."""
    best = None
    best_pair = None
    for pa in points_a:
        for pb in points_b:
            d = math.dist(pa, pb)
            if best is None or d < best:
                best = d
                best_pair = (pa, pb)
    assert best_pair is not None
    dx = best_pair[0][0] - best_pair[1][0]
    dy = best_pair[0][1] - best_pair[1][1]
    c = math.cos(heading)
    s = math.sin(heading)
    return best, abs(dx * c + dy * s), abs(-dx * s + dy * c)


def _member_longitudinal(points: Sequence[Point2], pose: Pose2D) -> float:
    c = math.cos(pose.heading)
    s = math.sin(pose.heading)
    return sum((x - pose.x) * c + (y - pose.y) * s for x, y in points) / len(points)


class SiteRegistry:
    """Active and finished roadwork sites of one session."""

    def __init__(
        self,
        separation: SeparationPolicy = SeparationPolicy(),
        contour_provider: ContourProvider | None = None,
        ghost_retention: float = GHOST_RETENTION,
        finalize_distance: float = FINALIZE_DISTANCE,
        hull_inflation: float = 1.5,
    ):
        self.separation = separation
        self.contour_provider = contour_provider or (lambda oid: None)
        self.ghost_retention = ghost_retention
        self.finalize_distance = finalize_distance
        self.hull_inflation = hull_inflation
        self.active: dict[int, RoadworkSite] = {}
        self.finished: list[SiteRecord] = []
        self._next_site_id = 1

    # -- membership ----------------------------------------------------

    def assign(
        self,
        object_id: int,
        object_class: str,
        contour: Sequence[Point2],
        pose: Pose2D,
        timestamp: float,
        arc: float,
    ) -> int:
        """Insert a newly promoted object into the site dictionary.

        The object joins every site holding a member within the class
        separation limits (joining several sites marks them for the
        split-site merge); with no qualifying site it founds a new one.
        Returns the id of the nearest joined site or of the new site.
        """
        contour = [(float(x), float(y)) for x, y in contour]
        qualified: list[tuple[float, int]] = []
        for site in self.active.values():
            best = None
            for member in site.members:
                dist, lon, lat = _separation(contour, member.points, pose.heading)
                limit = self.separation.longitudinal_for(object_class, member.object_class)
                if lon <= limit and lat <= self.separation.lateral:
                    if best is None or dist < best:
                        best = dist
            if best is not None:
                qualified.append((best, site.site_id))

        if not qualified:
            site = RoadworkSite(
                site_id=self._next_site_id,
                members=[SiteMember(object_id, object_class, contour)],
                start_time=timestamp,
                last_detection_time=timestamp,
                arc_position=arc,
            )
            self._next_site_id += 1
            self.active[site.site_id] = site
            return site.site_id

        qualified.sort()
        for _, site_id in qualified:
            self._insert_member(
                self.active[site_id], SiteMember(object_id, object_class, list(contour)), pose
            )
            self.active[site_id].last_detection_time = timestamp
            self.active[site_id].arc_position = arc
        return qualified[0][1]

    def _insert_member(
        self, site: RoadworkSite, member: SiteMember, pose: Pose2D
    ) -> None:
        """Place a member at its longitudinal rank and keep the head rule."""
        members = site.members + [member]
        members.sort(key=lambda m: _member_longitudinal(m.points, pose))
        old_head = site.members[0]
        new_head = members[0]
        if new_head is not old_head:
            full = self.contour_provider(new_head.object_id)
            if full:
                new_head.points = list(full)
            old_head.points = old_head.points[-1:]
        if member is not new_head:
            member.points = member.points[-1:]
        site.members = members

    def merge_split_sites(self, pose: Pose2D) -> None:
        """Unify sites sharing an object id, repeating until stable."""
        while True:
            owner: dict[int, int] = {}
            merge_pair = None
            for site in self.active.values():
                for oid in site.member_ids():
                    if oid in owner and owner[oid] != site.site_id:
                        merge_pair = (owner[oid], site.site_id)
                        break
                    owner[oid] = site.site_id
                if merge_pair:
                    break
            if not merge_pair:
                return
            keep_id, drop_id = sorted(merge_pair)
            self._merge_into(self.active[keep_id], self.active.pop(drop_id), pose)

    def _merge_into(
        self, target: RoadworkSite, source: RoadworkSite, pose: Pose2D
    ) -> None:
        seen = set()
        members = []
        for member in target.members + source.members:
            if member.object_id in seen:
                continue
            seen.add(member.object_id)
            members.append(member)
        members.sort(key=lambda m: _member_longitudinal(m.points, pose))
        for i, member in enumerate(members):
            if i == 0:
                full = self.contour_provider(member.object_id)
                if full:
                    member.points = list(full)
            else:
                member.points = member.points[-1:]
        target.members = members
        target.start_time = min(target.start_time, source.start_time)
        target.last_detection_time = max(
            target.last_detection_time, source.last_detection_time
        )
        target.arc_position = max(target.arc_position, source.arc_position)
        target.ghosts = sorted(set(target.ghosts) | set(source.ghosts))

    def remove_nested(self) -> list[int]:
        """Drop sites whose points all lie inside another site's inflated hull."""
        sites = list(self.active.values())
        removed: list[int] = []
        for site in sites:
            if site.site_id in removed:
                continue
            for other in sites:
                if other.site_id == site.site_id or other.site_id in removed:
                    continue
                if not self._contained_in(site, other):
                    continue
                if self._contained_in(other, site):
                    # Mutual containment: more members wins, then lower id.
                    if (len(other.members), -other.site_id) < (
                        len(site.members),
                        -site.site_id,
                    ):
                        continue
                removed.append(site.site_id)
                break
        for site_id in removed:
            del self.active[site_id]
        return removed

    def _contained_in(self, inner: RoadworkSite, outer: RoadworkSite) -> bool:
        hull = convex_hull(outer.stored_points())
        return all(
            distance_to_convex_polygon(p, hull) <= self.hull_inflation
            for p in inner.stored_points()
        )

    # -- per-frame upkeep ----------------------------------------------

    def refresh_members(self, world_contours: Mapping[int, Sequence[Point2]]) -> None:
        """Update stored points of members still visible to the LiDAR."""
        for site in self.active.values():
            for i, member in enumerate(site.members):
                contour = world_contours.get(member.object_id)
                if not contour:
                    continue
                pts = [(float(x), float(y)) for x, y in contour]
                member.points = pts if i == 0 else pts[-1:]

    def record_member_detections(
        self, matched_ids: Iterable[int], timestamp: float, arc: float
    ) -> None:
        """Refresh the finish countdown of sites whose members got re-detected."""
        matched = set(matched_ids)
        for site in self.active.values():
            if matched.intersection(site.member_ids()):
                site.last_detection_time = timestamp
                site.arc_position = arc

    def ghost_update(self, visible_ids: Iterable[int], pose: Pose2D) -> None:
        """Mark members that left the image but are still just behind us."""
        visible = set(visible_ids)
        c = math.cos(pose.heading)
        s = math.sin(pose.heading)
        for site in self.active.values():
            ghosts = []
            for member in site.members:
                if member.object_id in visible:
                    continue
                px, py = member.points[-1]
                longitudinal = (px - pose.x) * c + (py - pose.y) * s
                if -self.ghost_retention <= longitudinal <= 0.0:
                    ghosts.append(member.object_id)
            site.ghosts = ghosts

    # -- finishing -----------------------------------------------------

    def finalize_check(
        self, arc: float, timestamp: float, anchor: UtmAnchor | None
    ) -> list[SiteRecord]:
        """Finish sites the vehicle has fully driven past; returns new records."""
        records = []
        for site_id in [
            sid
            for sid, site in self.active.items()
            if arc - site.arc_position > self.finalize_distance
        ]:
            site = self.active.pop(site_id)
            site.finished = True
            records.append(self._build_record(site, timestamp, anchor))
        self.finished.extend(records)
        return records

    def _build_record(
        self, site: RoadworkSite, timestamp: float, anchor: UtmAnchor | None
    ) -> SiteRecord:
        raw = site.stored_points()
        hull = convex_hull(raw)
        dims = site_dimensions(site)
        if anchor is not None:
            raw = [local_to_utm(p, anchor) for p in raw]
            hull = [local_to_utm(p, anchor) for p in hull]
        return SiteRecord(
            site_id=site.site_id,
            raw_polygon=tuple(raw),
            hull_polygon=tuple(hull),
            length=dims.length,
            depth=dims.depth,
            class_counts=site.class_counts(),
            start_time=site.start_time,
            end_time=site.last_detection_time,
            frame="utm" if anchor is not None else "local",
            utm_zone=anchor.zone if anchor is not None else None,
        )
