"""Replay engine: drives the full fusion pipeline over recorded streams.

Streams are loaded up front (ingest is allowed to prefetch; files are
session-sized), then every LiDAR frame triggers one processing cycle:

  pose lookup -> detector pairing/gating -> contour boxes -> matching
  -> tracking -> site dictionary upkeep -> outputs

Cycle latency is measured around the processing work only, which mirrors
live operation where detections arrive precomputed from the camera
pipeline.
"""
from __future__ import annotations

import bisect
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .config import SessionConfig
from .detections import DetectionFrame, gate_detections, pair_with_lidar
from .fusion import match_frame
from .lidar import build_contour_box, contour_to_world, object_range
from .outputs import (
    AnnotationEntry,
    AnnotationWriter,
    FrameAnnotation,
    Summary,
    summarize,
    write_site_record,
    write_summary,
)
from .sites import SiteRecord, SiteRegistry
from .streams import LidarFrame, OdometrySample
from .tracking import ObjectTracker, detection_threshold
from .geometry import Pose2D

DetectionSource = Callable[[int, float], "DetectionFrame | None"]


@dataclass
class ReplayResult:
    summary: Summary
    site_records: list[SiteRecord]
    cycles: int = 0
    skipped_cycles: int = 0
    latencies: list[float] = field(default_factory=list)

    @property
    def latency_max(self) -> float:
        return max(self.latencies) if self.latencies else 0.0

    @property
    def latency_mean(self) -> float:
        return sum(self.latencies) / len(self.latencies) if self.latencies else 0.0


class ReplayEngine:
    """One replay session over three recorded streams."""

    def __init__(
        self,
        config: SessionConfig,
        detection_source: DetectionSource | None = None,
    ):
        self.config = config
        self.detection_source = detection_source
        self.tracker = ObjectTracker(config.threshold, config.eviction_timeout)
        self.registry = SiteRegistry(
            separation=config.separation,
            contour_provider=self.tracker.world_contour,
            ghost_retention=config.ghost_retention,
            finalize_distance=config.finalize_distance,
            hull_inflation=config.hull_inflation,
        )

    def run(
        self,
        odometry: Sequence[OdometrySample],
        lidar_frames: Sequence[LidarFrame],
        detection_frames: Sequence[DetectionFrame],
        out_dir: Path | None = None,
    ) -> ReplayResult:
        result = ReplayResult(summary=Summary(False, 0, ()), site_records=[])
        odo_times = [s.timestamp for s in odometry]
        arcs = _cumulative_arc(odometry)
        origin = (odometry[0].x, odometry[0].y) if odometry else (0.0, 0.0)
        det_times = [f.timestamp for f in detection_frames]

        annotation_writer = None
        annotations_file = None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            annotations_file = open(out_dir / "annotations.jsonl", "w")
            annotation_writer = AnnotationWriter(annotations_file)

        try:
            for cycle_index, frame in enumerate(lidar_frames):
                started = time.perf_counter()
                sample_index = _nearest_sample(odo_times, frame.timestamp,
                                               self.config.pairing_window)
                if sample_index is None:
                    result.skipped_cycles += 1
                    continue
                sample = odometry[sample_index]
                pose = Pose2D(sample.x - origin[0], sample.y - origin[1], sample.heading)
                arc = arcs[sample_index]

                records = self._cycle(
                    cycle_index, frame, pose, sample.speed, arc,
                    detection_frames, det_times, annotation_writer,
                )
                for record in records:
                    result.site_records.append(record)
                    if out_dir is not None:
                        write_site_record(record, out_dir)
                result.cycles += 1
                result.latencies.append(time.perf_counter() - started)
        finally:
            if annotations_file is not None:
                annotations_file.close()

        result.summary = summarize(list(self.registry.active.values()),
                                   self.registry.finished)
        if out_dir is not None:
            write_summary(result.summary, out_dir)
        return result

    def _cycle(
        self,
        cycle_index: int,
        frame: LidarFrame,
        pose: Pose2D,
        speed: float,
        arc: float,
        detection_frames: Sequence[DetectionFrame],
        det_times: list[float],
        annotation_writer: AnnotationWriter | None,
    ) -> list[SiteRecord]:
        config = self.config

        if self.detection_source is not None:
            paired = self.detection_source(cycle_index, frame.timestamp)
        else:
            lo = bisect.bisect_left(det_times, frame.timestamp - config.pairing_window)
            hi = bisect.bisect_right(det_times, frame.timestamp + config.pairing_window)
            paired = pair_with_lidar(detection_frames[lo:hi], frame.timestamp,
                                     config.pairing_window)
        gated = gate_detections(paired.detections, config.confidence) if paired else []

        in_range = [
            contour
            for contour in frame.objects
            if object_range(contour) <= config.matching.tracking_range
        ]
        boxes = {}
        for contour in in_range:
            box = build_contour_box(contour, config.sensor)
            if box is not None:
                boxes[contour.object_id] = box

        matches = match_frame(gated, list(boxes.values()), config.matching)
        world = {c.object_id: contour_to_world(c, pose) for c in in_range}
        promoted = self.tracker.update(matches, world, speed, frame.timestamp)

        self.registry.refresh_members(world)
        for obj in promoted:
            assert obj.object_class is not None  # promotion implies a CNN match
            self.registry.assign(
                obj.object_id, obj.object_class, obj.world_contour,
                pose, frame.timestamp, arc,
            )
        self.registry.merge_split_sites(pose)
        self.registry.remove_nested()
        self.registry.record_member_detections(
            (m.object_id for m in matches), frame.timestamp, arc)
        self.registry.ghost_update(boxes.keys(), pose)
        records = self.registry.finalize_check(arc, frame.timestamp, config.anchor)
        if records and not self.registry.active:
            # The drive has left every known site behind: start fresh.
            self.tracker.reset()

        if annotation_writer is not None:
            annotation_writer.write(
                self._annotate(frame.timestamp, speed, boxes, matches))
        return records

    def _annotate(self, timestamp, speed, boxes, matches) -> FrameAnnotation:
        site_of = {}
        member_class = {}
        for site in self.registry.active.values():
            for member in site.members:
                site_of[member.object_id] = site.site_id
                member_class[member.object_id] = member.object_class
        iou_of = {m.object_id: m.iou for m in matches}

        entries = []
        for oid, box in boxes.items():
            tracked = self.tracker.get(oid)
            entries.append(AnnotationEntry(
                object_id=oid,
                object_class=tracked.object_class if tracked else None,
                site_id=site_of.get(oid),
                ghost=False,
                box=box.box,
                iou=iou_of.get(oid),
            ))
        for site in self.registry.active.values():
            for ghost_id in site.ghosts:
                entries.append(AnnotationEntry(
                    object_id=ghost_id,
                    object_class=member_class.get(ghost_id),
                    site_id=site.site_id,
                    ghost=True,
                ))
        return FrameAnnotation(
            timestamp=timestamp,
            speed=speed,
            detection_threshold=detection_threshold(speed, self.config.threshold),
            entries=tuple(entries),
        )


def _cumulative_arc(odometry: Sequence[OdometrySample]) -> list[float]:
    arcs = []
    total = 0.0
    for i, sample in enumerate(odometry):
        if i:
            total += math.dist((sample.x, sample.y),
                               (odometry[i - 1].x, odometry[i - 1].y))
        arcs.append(total)
    return arcs


def _nearest_sample(times: list[float], t: float, window: float) -> int | None:
    if not times:
        return None
    i = bisect.bisect_left(times, t)
    best = None
    for j in (i - 1, i):
        if 0 <= j < len(times) and abs(times[j] - t) <= window:
            if best is None or abs(times[j] - t) < abs(times[best] - t):
                best = j
    return best
