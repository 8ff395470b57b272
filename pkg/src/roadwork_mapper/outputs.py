"""Output documents: frame annotations, site records, session summary.

Annotations stream out as one JSON line per LiDAR cycle; every finished
site becomes its own JSON document; the summary is written once at the
end of a session.  All floats use fixed 17-significant-digit formatting
so identical replays produce identical bytes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

from . import jsonio
from .geometry import PixelBox
from .sites import RoadworkSite, SiteRecord, site_dimensions


@dataclass(frozen=True)
class AnnotationEntry:
    """One object drawn into a camera frame."""

    object_id: int
    object_class: str | None
    site_id: int | None
    ghost: bool
    box: PixelBox | None = None
    iou: float | None = None


@dataclass(frozen=True)
class FrameAnnotation:
    timestamp: float
    speed: float
    detection_threshold: int
    entries: tuple[AnnotationEntry, ...]


def annotation_to_dict(annotation: FrameAnnotation) -> dict:
    entries = []
    for e in annotation.entries:
        item: dict = {
            "object_id": e.object_id,
            "class": e.object_class,
            "site_id": e.site_id,
            "ghost": e.ghost,
        }
        if e.box is not None:
            item["box"] = [e.box.x_min, e.box.y_min, e.box.x_max, e.box.y_max]
        if e.iou is not None:
            item["iou"] = e.iou
        entries.append(item)
    return {
        "t": annotation.timestamp,
        "speed": annotation.speed,
        "detection_threshold": annotation.detection_threshold,
        "objects": entries,
    }


class AnnotationWriter:
    """Appends frame annotations to a JSON-lines file."""

    def __init__(self, stream: IO[str]):
        self._stream = stream

    def write(self, annotation: FrameAnnotation) -> None:
        self._stream.write(jsonio.dumps(annotation_to_dict(annotation)) + "\n")


def site_record_to_dict(record: SiteRecord) -> dict:
    return {
        "site_id": record.site_id,
        "frame": record.frame,
        "utm_zone": record.utm_zone,
        "raw_polygon": [[x, y] for x, y in record.raw_polygon],
        "hull_polygon": [[x, y] for x, y in record.hull_polygon],
        "length": record.length,
        "depth": record.depth,
        "class_counts": record.class_counts,
        "start_time": record.start_time,
        "end_time": record.end_time,
    }


def site_record_from_dict(data: dict) -> SiteRecord:
    return SiteRecord(
        site_id=int(data["site_id"]),
        raw_polygon=tuple((float(x), float(y)) for x, y in data["raw_polygon"]),
        hull_polygon=tuple((float(x), float(y)) for x, y in data["hull_polygon"]),
        length=float(data["length"]),
        depth=float(data["depth"]),
        class_counts={str(k): int(v) for k, v in data["class_counts"].items()},
        start_time=float(data["start_time"]),
        end_time=float(data["end_time"]),
        frame=str(data["frame"]),
        utm_zone=None if data.get("utm_zone") is None else str(data["utm_zone"]),
    )


def write_site_record(record: SiteRecord, out_dir: Path) -> Path:
    sites_dir = out_dir / "sites"
    sites_dir.mkdir(parents=True, exist_ok=True)
    path = sites_dir / f"site_{record.site_id:06d}.json"
    path.write_text(jsonio.dumps(site_record_to_dict(record)) + "\n")
    return path


def load_site_records(out_dir: Path) -> list[SiteRecord]:
    sites_dir = Path(out_dir) / "sites"
    if not sites_dir.is_dir():
        return []
    return [
        site_record_from_dict(jsonio.loads(p.read_text()))
        for p in sorted(sites_dir.glob("site_*.json"))
    ]


@dataclass(frozen=True)
class Summary:
    roadworks_present: bool
    count: int
    sites: tuple[tuple[int, float, float], ...]  # (site_id, length, depth), 0.1 m steps


def _round_decimeter(x: float) -> float:
    return math.floor(x * 10.0 + 0.5) / 10.0


def summarize(
    active: Sequence[RoadworkSite], finished: Sequence[SiteRecord]
) -> Summary:
    """Condense a session's sites, finished and still active, into a summary."""
    entries = []
    for record in finished:
        entries.append((record.site_id, _round_decimeter(record.length), _round_decimeter(record.depth)))
    for site in active:
        dims = site_dimensions(site)
        entries.append((site.site_id, _round_decimeter(dims.length), _round_decimeter(dims.depth)))
    entries.sort()
    return Summary(
        roadworks_present=bool(entries),
        count=len(entries),
        sites=tuple(entries),
    )


def summary_to_dict(summary: Summary) -> dict:
    return {
        "roadworks_present": summary.roadworks_present,
        "count": summary.count,
        "sites": [
            {"site_id": sid, "length": length, "depth": depth}
            for sid, length, depth in summary.sites
        ],
    }


def write_summary(summary: Summary, out_dir: Path) -> Path:
    path = Path(out_dir) / "summary.json"
    path.write_text(jsonio.dumps(summary_to_dict(summary)) + "\n")
    (Path(out_dir) / "summary.txt").write_text(summary_text(summary) + "\n")
    return path


def summary_text(summary: Summary) -> str:
    """One human-readable line, e.g. '2 roadworks; 20.0 m x 1.4 m; 7.4 m x 0.3 m'."""
    if not summary.roadworks_present:
        return "no roadworks"
    parts = [f"{summary.count} roadwork{'s' if summary.count != 1 else ''}"]
    for _, length, depth in summary.sites:
        parts.append(f"{length:.1f} m x {depth:.1f} m")
    return "; ".join(parts)
