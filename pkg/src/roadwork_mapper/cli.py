"""Command-line front end.

Verbs:
  replay     run the fusion pipeline over recorded streams
  simulate   generate synthetic streams plus ground truth from a scenario
  evaluate   score replay site records against ground truth

Exit codes: 0 success, 2 configuration error, 3 input format error.
"""
from __future__ import annotations

import argparse
import dataclasses
import shlex
import subprocess
import sys
from pathlib import Path

from . import jsonio, simulator, streams
from .config import ConfigError, SessionConfig, default_config, load_config
from .detections import DetectionFrame, ExternalDetectorLink
from .engine import ReplayEngine
from .outputs import load_site_records, summary_text
from .streams import LidarFrame, OdometrySample, StreamFormatError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FORMAT = 3

STREAM_FILES = {
    "odometry": "odometry.jsonl",
    "lidar_objects": "lidar_objects.jsonl",
    "detections": "detections.jsonl",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadwork-mapper",
        description="Detect, track and measure roadwork sites from recorded drives.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    replay = sub.add_parser("replay", help="replay recorded streams through the pipeline")
    replay.add_argument("--config", type=Path, help="session config YAML")
    replay.add_argument("--in-dir", type=Path,
                        help="directory holding odometry.jsonl, lidar_objects.jsonl, detections.jsonl")
    replay.add_argument("--out-dir", type=Path, required=True)
    replay.add_argument("--latency-report", action="store_true",
                        help="write latency.json and print per-cycle latency statistics")
    replay.add_argument("--detector-cmd",
                        help="run this command as a live detector over the line protocol")

    simulate = sub.add_parser("simulate", help="generate synthetic streams from a scenario")
    simulate.add_argument("--scenario", type=Path, required=True)
    simulate.add_argument("--out-dir", type=Path, required=True)
    simulate.add_argument("--seed", type=int, help="override the scenario seed")

    evaluate = sub.add_parser("evaluate", help="score site records against ground truth")
    evaluate.add_argument("--records", type=Path, required=True,
                          help="replay output directory containing sites/")
    evaluate.add_argument("--ground-truth", type=Path, required=True)
    return parser


def _resolve_inputs(config: SessionConfig, in_dir: Path | None) -> dict[str, Path]:
    inputs = dict(config.inputs)
    if in_dir is not None:
        for key, name in STREAM_FILES.items():
            inputs.setdefault(key, in_dir / name)
    missing = [key for key in STREAM_FILES if key not in inputs]
    if missing:
        raise ConfigError(
            "missing input streams: " + ", ".join(sorted(missing))
            + " (set inputs.* in the config or pass --in-dir)"
        )
    return inputs


def run_replay(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else default_config()
    inputs = _resolve_inputs(config, args.in_dir)
    odometry = streams.read_stream(inputs["odometry"], OdometrySample)
    lidar = streams.read_stream(inputs["lidar_objects"], LidarFrame)
    detections = streams.read_stream(inputs["detections"], DetectionFrame)

    detector_proc = None
    detection_source = None
    if args.detector_cmd:
        detector_proc = subprocess.Popen(
            shlex.split(args.detector_cmd),
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True,
        )
        link = ExternalDetectorLink(detector_proc.stdin, detector_proc.stdout)
        detection_source = lambda index, t: link.request(t, f"frame:{index}")

    try:
        engine = ReplayEngine(config, detection_source=detection_source)
        result = engine.run(odometry, lidar, detections, out_dir=args.out_dir)
    finally:
        if detector_proc is not None:
            detector_proc.stdin.close()
            detector_proc.wait()

    print(summary_text(result.summary))
    print(f"{result.cycles} cycles, {result.skipped_cycles} skipped, "
          f"{len(result.site_records)} site records")
    if args.latency_report:
        stats = {
            "cycles": result.cycles,
            "max_seconds": result.latency_max,
            "mean_seconds": result.latency_mean,
            "per_cycle_seconds": result.latencies,
        }
        (args.out_dir / "latency.json").write_text(jsonio.dumps(stats) + "\n")
        print(f"latency max {result.latency_max * 1000.0:.2f} ms, "
              f"mean {result.latency_mean * 1000.0:.2f} ms")
    return EXIT_OK


def run_simulate(args: argparse.Namespace) -> int:
    scenario = simulator.load_scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    drive = simulator.generate_streams(scenario)
    out_dir: Path = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    streams.write_stream(out_dir / STREAM_FILES["odometry"], drive.odometry)
    streams.write_stream(out_dir / STREAM_FILES["lidar_objects"], drive.lidar)
    streams.write_stream(out_dir / STREAM_FILES["detections"], drive.detections)
    simulator.write_ground_truth(drive.ground_truth, out_dir / "ground_truth.json")
    print(f"{len(drive.odometry)} odometry samples, {len(drive.lidar)} lidar frames, "
          f"{len(drive.detections)} detection frames, "
          f"{len(drive.ground_truth.sites)} ground-truth sites")
    return EXIT_OK


def run_evaluate(args: argparse.Namespace) -> int:
    records = load_site_records(args.records)
    truth = simulator.load_ground_truth(args.ground_truth)
    evaluation = simulator.evaluate(records, truth)
    for gi, corner, error in evaluation.corner_errors:
        print(f"site {gi} {corner}: {error:.3f} m")
    if evaluation.corner_errors:
        print(f"mean {evaluation.mean_error:.3f} m, sd {evaluation.std_error:.3f} m "
              f"over {len(evaluation.corner_errors)} corners")
    print(f"{evaluation.matched_sites} sites matched, {evaluation.missed_sites} missed")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "replay": run_replay,
        "simulate": run_simulate,
        "evaluate": run_evaluate,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except StreamFormatError as err:
        print(f"input format error: {err}", file=sys.stderr)
        return EXIT_FORMAT
    except FileNotFoundError as err:
        print(f"input format error: {err}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
