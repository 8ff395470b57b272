from pathlib import Path

import pytest

from roadwork_mapper.config import (
    ConfigError,
    config_from_dict,
    default_config,
    load_config,
)


def test_defaults_reproduce_published_constants():
    cfg = default_config()
    assert cfg.confidence.barrier_threshold == 0.75
    assert cfg.confidence.other_threshold == 0.70
    assert cfg.matching.iou_threshold == 0.5
    assert cfg.matching.size_ratio_limit == 2.0
    assert cfg.matching.tracking_range == 50.0
    assert cfg.threshold.scale == 5.0
    assert cfg.threshold.divisor == 12.5
    assert cfg.threshold.usable_range == 50.0
    assert cfg.threshold.fps == 10.0
    assert (cfg.threshold.min_threshold, cfg.threshold.max_threshold) == (2, 5)
    assert cfg.separation.panel_panel_longitudinal == 12.0
    assert cfg.separation.barrier_barrier_longitudinal == 2.0
    assert cfg.separation.barrier_other_longitudinal == 6.0
    assert cfg.separation.lateral == 1.5
    assert cfg.eviction_timeout == 2.0
    assert cfg.ghost_retention == 15.0
    assert cfg.finalize_distance == 50.0
    assert cfg.hull_inflation == 1.5
    assert cfg.pairing_window == 0.100
    assert cfg.anchor is None
    assert cfg.sensor.object_height == 1.60


def test_empty_dict_equals_defaults():
    cfg = config_from_dict({})
    ref = default_config()
    assert cfg.confidence == ref.confidence
    assert cfg.matching == ref.matching
    assert cfg.threshold == ref.threshold
    assert cfg.separation == ref.separation
    assert cfg.sensor.intrinsics == ref.sensor.intrinsics


def test_overrides_and_utm_anchor():
    cfg = config_from_dict(
        {
            "confidence": {"barrier": 0.9},
            "matching": {"iou": 0.3},
            "separation": {"lateral": 2.5},
            "threshold": {"min": 1, "max": 9},
            "tracking": {"eviction_timeout": 4.0},
            "sites": {"finalize_distance": 75.0},
            "utm": {"easting": 500000.0, "northing": 4000000.0, "zone": "32U"},
        }
    )
    assert cfg.confidence.barrier_threshold == 0.9
    assert cfg.confidence.other_threshold == 0.70
    assert cfg.matching.iou_threshold == 0.3
    assert cfg.separation.lateral == 2.5
    assert cfg.threshold.max_threshold == 9
    assert cfg.eviction_timeout == 4.0
    assert cfg.finalize_distance == 75.0
    assert cfg.anchor.zone == "32U"


def test_calibration_overrides():
    cfg = config_from_dict(
        {
            "calibration": {
                "intrinsics": {"fx": 800.0, "width": 1280, "cx": 640.0},
                "sensor_mount_height": 0.4,
            }
        }
    )
    assert cfg.sensor.intrinsics.fx == 800.0
    assert cfg.sensor.intrinsics.fy == 500.0
    assert cfg.sensor.intrinsics.width == 1280
    assert cfg.sensor.sensor_mount_height == 0.4


@pytest.mark.parametrize(
    "data",
    [
        {"matching": "fast"},
        {"matching": {"iou": "high"}},
        {"matching": {"iou": True}},
        {"threshold": {"min": 2.5}},
        {"threshold": {"min": 6, "max": 2}},
        {"utm": {"easting": 500000.0, "northing": 4000000.0}},
        {"utm": {"easting": 1.0, "northing": 1.0, "zone": "32U"}},
        {"calibration": {"intrinsics": {"fx": -5.0}}},
        {"calibration": {"extrinsic": {"rotation": [[1, 0], [0, 1]]}}},
    ],
)
def test_invalid_config_raises(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_input_paths_resolve_against_config_dir(tmp_path):
    cfg_path = tmp_path / "session.yaml"
    cfg_path.write_text(
        "inputs:\n"
        "  odometry: odometry.jsonl\n"
        "  lidar_objects: /abs/lidar.jsonl\n"
    )
    cfg = load_config(cfg_path)
    assert cfg.inputs["odometry"] == tmp_path / "odometry.jsonl"
    assert cfg.inputs["lidar_objects"] == Path("/abs/lidar.jsonl")
    assert "detections" not in cfg.inputs


def test_empty_yaml_file_is_default(tmp_path):
    cfg_path = tmp_path / "session.yaml"
    cfg_path.write_text("")
    cfg = load_config(cfg_path)
    assert cfg.matching == default_config().matching


def test_missing_or_invalid_yaml(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("matching: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(bad)
