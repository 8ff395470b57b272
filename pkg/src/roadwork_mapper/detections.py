"""Camera detector records: classes, confidence gating, frame pairing.

Detections come from a CNN running on downscaled camera frames, either
pre-recorded in a stream file or requested live from an external
detector process over a line protocol.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Sequence

from .geometry import PixelBox

BARRIER = "Barrier"
TRAFFIC_CONE = "TrafficCone"
PANEL_PASS_LEFT = "PanelPassLeft"
PANEL_PASS_RIGHT = "PanelPassRight"

OBJECT_CLASSES = (BARRIER, TRAFFIC_CONE, PANEL_PASS_LEFT, PANEL_PASS_RIGHT)


@dataclass(frozen=True)
class Detection:
    """One CNN detection in image coordinates."""

    object_class: str
    confidence: float
    box: PixelBox

    def __post_init__(self) -> None:
        if self.object_class not in OBJECT_CLASSES:
            raise ValueError(f"unknown object class {self.object_class!r}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError("confidence must be within [0, 1]")


@dataclass(frozen=True)
class DetectionFrame:
    """All detections reported for one camera frame."""

    timestamp: float
    detections: tuple[Detection, ...]


@dataclass(frozen=True)
class ConfidencePolicy:
    """Per-class minimum confidences (inclusive)."""

    barrier_threshold: float = 0.75
    other_threshold: float = 0.70

    def threshold_for(self, object_class: str) -> float:
        if object_class == BARRIER:
            return self.barrier_threshold
        return self.other_threshold


def gate_detections(
    detections: Sequence[Detection], policy: ConfidencePolicy
) -> list[Detection]:
    """Keep detections at or above their class confidence threshold."""
    return [d for d in detections if d.confidence >= policy.threshold_for(d.object_class)]


# Maximum camera/LiDAR timestamp offset for a frame pairing, seconds.
PAIRING_WINDOW = 0.100


def pair_with_lidar(
    frames: Sequence[DetectionFrame],
    lidar_timestamp: float,
    window: float = PAIRING_WINDOW,
) -> DetectionFrame | None:
    """Pick the most recent detection frame within the pairing window.

    ``frames`` must be sorted by timestamp.  Returns None when no frame
    lies within the window; the LiDAR cycle then runs without camera
    input.
    """
    best = None
    for frame in frames:
        if abs(frame.timestamp - lidar_timestamp) <= window:
            best = frame  # sorted input: later qualifying frames overwrite
        elif frame.timestamp > lidar_timestamp + window:
            break
    return best


class ExternalDetectorLink:
    """Line protocol to an external live detector.

    The engine writes one frame-reference line and reads back exactly one
    ``detections`` stream record (same schema as file ingest).
    """

    def __init__(self, writer: IO[str], reader: IO[str]):
        self._writer = writer
        self._reader = reader

    def request(self, timestamp: float, frame_ref: str) -> DetectionFrame:
        from . import jsonio, streams

        self._writer.write(
            jsonio.dumps({"type": "frame_request", "t": timestamp, "frame": frame_ref})
            + "\n"
        )
        self._writer.flush()
        line = self._reader.readline()
        if not line:
            raise IOError("external detector closed the stream")
        record = streams.parse_line(line, lineno=0)
        if not isinstance(record, DetectionFrame):
            raise IOError("external detector answered with a non-detections record")
        return record
