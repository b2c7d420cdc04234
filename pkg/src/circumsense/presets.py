"""Canonical hardware constants and benchmark scenarios shared by tests and scripts.

The ring dimensions (10.7 mm sleeve, 6.25 mm unit spacing, four units) give
roughly 200 degrees of azimuthal coverage; the four calibration curves are
distinct per unit, as fitted hardware units are.
"""

from __future__ import annotations

import math

from .mapping import RingLayout, ZoneThresholds, boresight, sensor_world_pose
from .optical import (
    DEFAULT_SENSITIVITY_FLOOR_FRACTION,
    SensorCalibration,
    logistic_thresholds,
)
from .pcc import SegmentConfig, SegmentGeometry, disk_pose
from .sim import DEFAULT_SENSOR_NOISE, NO_NOISE, NoiseModel, PlaneObstacle, Scenario

DEFAULT_LENGTH_MM = 100.0
DEFAULT_GEOMETRY = SegmentGeometry(cable_radius=4.0, disk_count=5)
DEFAULT_RING = RingLayout(
    sleeve_outer_diameter=10.7,
    unit_spacing=6.25,
    unit_count=4,
    mount_disk_index=5,
)
DEFAULT_ZONES = ZoneThresholds(d_warn=10.0, d_intrude=3.0)
DEFAULT_MAX_DISTANCE_MM = 30.0

# (v_max [V], k_slope [1/mm], delta_z0 [mm], epsilon [V]) per unit; negative
# slope because voltage rises as the target closes in.
_UNIT_CURVES = (
    (3.0, -0.80, 8.0, 0.40),
    (3.2, -0.72, 7.5, 0.35),
    (2.8, -0.88, 8.5, 0.45),
    (3.1, -0.76, 7.8, 0.38),
)


def default_calibration_set() -> tuple[SensorCalibration, ...]:
    calibrations = []
    for v_max, k_slope, delta_z0, epsilon in _UNIT_CURVES:
        floor = DEFAULT_SENSITIVITY_FLOOR_FRACTION * abs(k_slope) * v_max / 4.0
        low, up = logistic_thresholds(v_max, k_slope, epsilon, floor)
        calibrations.append(
            SensorCalibration(
                v_max=v_max,
                k_slope=k_slope,
                delta_z0=delta_z0,
                epsilon=epsilon,
                threshold_low=low,
                threshold_up=up,
                max_distance=DEFAULT_MAX_DISTANCE_MM,
            )
        )
    return tuple(calibrations)


def straight_cables() -> tuple[float, float, float]:
    return (DEFAULT_LENGTH_MM, DEFAULT_LENGTH_MM, DEFAULT_LENGTH_MM)


def _straight_sensor_frames() -> list[tuple]:
    cfg = SegmentConfig(0.0, 0.0, DEFAULT_LENGTH_MM)
    disk = disk_pose(DEFAULT_RING.mount_disk_index, cfg, DEFAULT_GEOMETRY)
    frames = []
    for unit in range(DEFAULT_RING.unit_count):
        pose = sensor_world_pose(disk, DEFAULT_RING, unit)
        frames.append((pose.position, boresight(pose)))
    return frames


def approach_scenario(
    noise: NoiseModel = DEFAULT_SENSOR_NOISE,
    seed: int = 7,
    start_gap_mm: float = 20.0,
    end_gap_mm: float = 2.0,
    speed_mm_s: float = 1.0,
) -> Scenario:
    """Four flat targets close on their units at constant speed.

    Each plane faces its unit head-on and slides along the boresight from
    beyond sensing range down through the sensitive band, mirroring a
    controlled proximity sweep.
    """
    if not 0.0 <= end_gap_mm < start_gap_mm:
        raise ValueError("need 0 <= end_gap < start_gap")
    duration_ms = (start_gap_mm - end_gap_mm) / speed_mm_s * 1000.0
    obstacles = []
    for position, axis in _straight_sensor_frames():
        start = position + start_gap_mm * axis
        end = position + end_gap_mm * axis
        obstacles.append(
            PlaneObstacle(
                point=tuple(float(c) for c in start),
                normal=tuple(float(c) for c in -axis),
                trajectory=(
                    (0.0, tuple(float(c) for c in start)),
                    (duration_ms, tuple(float(c) for c in end)),
                ),
            )
        )
    return Scenario(
        name="approach",
        length=DEFAULT_LENGTH_MM,
        geometry=DEFAULT_GEOMETRY,
        ring=DEFAULT_RING,
        calibrations=default_calibration_set(),
        noise=noise,
        obstacles=tuple(obstacles),
        actuation=((0.0, straight_cables()),),
        duration_ms=duration_ms,
        seed=seed,
        zones=DEFAULT_ZONES,
    )


def static_scenario(
    noise: NoiseModel = NO_NOISE,
    duration_ms: float = 10000.0,
    seed: int = 3,
    gaps_mm: tuple[float, ...] | None = None,
) -> Scenario:
    """Static robot, one fixed flat target per unit.

    By default each target sits at the unit's curve midpoint, the most
    sensitive gap, so noiseless error is purely the quantization floor.
    """
    calibrations = default_calibration_set()
    if gaps_mm is None:
        gaps_mm = tuple(calib.delta_z0 for calib in calibrations)
    if len(gaps_mm) != DEFAULT_RING.unit_count:
        raise ValueError(f"need {DEFAULT_RING.unit_count} gaps, got {len(gaps_mm)}")
    obstacles = []
    for (position, axis), gap in zip(_straight_sensor_frames(), gaps_mm):
        anchor = position + gap * axis
        obstacles.append(
            PlaneObstacle(
                point=tuple(float(c) for c in anchor),
                normal=tuple(float(c) for c in -axis),
            )
        )
    return Scenario(
        name="static",
        length=DEFAULT_LENGTH_MM,
        geometry=DEFAULT_GEOMETRY,
        ring=DEFAULT_RING,
        calibrations=calibrations,
        noise=noise,
        obstacles=tuple(obstacles),
        actuation=((0.0, straight_cables()),),
        duration_ms=duration_ms,
        seed=seed,
        zones=DEFAULT_ZONES,
    )


def empty_scenario(duration_ms: float = 2000.0, seed: int = 11) -> Scenario:
    """No obstacles at all; every tick reads the far-field asymptote."""
    return Scenario(
        name="empty",
        length=DEFAULT_LENGTH_MM,
        geometry=DEFAULT_GEOMETRY,
        ring=DEFAULT_RING,
        calibrations=default_calibration_set(),
        noise=NO_NOISE,
        obstacles=(),
        actuation=((0.0, straight_cables()),),
        duration_ms=duration_ms,
        seed=seed,
        zones=DEFAULT_ZONES,
    )
