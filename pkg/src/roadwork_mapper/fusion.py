"""Frame-level matching of CNN detections to LiDAR contour boxes.

Both sensors describe the same objects in image space, so a detection
and a contour box belong together when they overlap strongly.  Several
contour boxes can overlap one detection (objects partially occluding
each other project close together); the bottom edge breaks the tie
because the contour bottom line of the truly matching object sits on
the detection's lower box edge.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .detections import BARRIER, Detection
from .geometry import iou
from .lidar import ContourBoxImage


@dataclass(frozen=True)
class MatchParams:
    iou_threshold: float = 0.5        # overlap must exceed this (strict)
    size_ratio_limit: float = 2.0     # contour box area vs detection area
    tracking_range: float = 50.0      # meters; objects beyond are ignored


@dataclass(frozen=True)
class Match:
    """An accepted detection/contour pairing within one frame."""

    detection_index: int
    object_id: int
    object_class: str
    confidence: float
    iou: float
    bottom_gap: float


def bottom_gap(detection: Detection, box: ContourBoxImage) -> float:
    """Distance between the contour bottom line and the detection's lower edge."""
    if box.bottom_line:
        mean_y = sum(v for _, v in box.bottom_line) / len(box.bottom_line)
    else:
        mean_y = box.box.y_max
    return abs(mean_y - detection.box.y_max)


def candidate_ids(
    detection: Detection,
    boxes: Sequence[ContourBoxImage],
    params: MatchParams,
    ious: Mapping[int, float] | None = None,
    apply_size_filter: bool = True,
) -> list[int]:
    """Contour object ids eligible to match one detection."""
    det_area = detection.box.area()
    out = []
    for box in boxes:
        overlap = ious[box.object_id] if ious is not None else iou(detection.box, box.box)
        if overlap <= params.iou_threshold:
            continue
        if (
            apply_size_filter
            and detection.object_class != BARRIER
            and box.box.area() > params.size_ratio_limit * det_area
        ):
            # An oversized contour box means the LiDAR merged several
            # objects; barriers are exempt since they really are long.
            continue
        out.append(box.object_id)
    return out


def match_frame(
    detections: Sequence[Detection],
    boxes: Sequence[ContourBoxImage],
    params: MatchParams = MatchParams(),
) -> list[Match]:
    """Greedy one-to-one assignment, most confident detections first.

    Each detection takes the remaining candidate with the smallest
    bottom gap; ties fall back to higher IoU, then lower object id.
    """
    by_id = {box.object_id: box for box in boxes}
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].confidence, i))
    taken: set[int] = set()
    matches: list[Match] = []
    for det_index in order:
        det = detections[det_index]
        ious = {box.object_id: iou(det.box, box.box) for box in boxes}
        best_id = None
        best_key = None
        for oid in candidate_ids(det, boxes, params, ious):
            if oid in taken:
                continue
            key = (bottom_gap(det, by_id[oid]), -ious[oid], oid)
            if best_key is None or key < best_key:
                best_key = key
                best_id = oid
        if best_id is None:
            continue
        taken.add(best_id)
        matches.append(
            Match(
                detection_index=det_index,
                object_id=best_id,
                object_class=det.object_class,
                confidence=det.confidence,
                iou=ious[best_id],
                bottom_gap=best_key[0],
            )
        )
    return matches
