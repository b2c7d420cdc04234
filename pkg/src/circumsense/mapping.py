"""Sensing-ring geometry, gap clamping, obstacle-map updates, and zone labels.

The ring of proximity units wraps a sleeve on one vertebral disk. Each unit
looks radially outward along its boresight; filtered voltages clamp to
contact / in-range / beyond-range gap estimates, which update a local
obstacle map of points, tangent planes, and per-channel proximity zones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .optical import SensorCalibration, invert_voltage
from .pcc import DiskPose, Pose, _rot_z

DEFAULT_HISTORY_HORIZON_MS = 2000.0


class GapStatus(Enum):
    CONTACT = "contact"
    IN_RANGE = "in-range"
    BEYOND_RANGE = "beyond-range"


class Zone(Enum):
    SAFE = "safe"
    WARNING = "warning"
    INTRUSION = "intrusion"


# Higher value = closer obstacle = more severe.
ZONE_SEVERITY = {Zone.SAFE: 0, Zone.WARNING: 1, Zone.INTRUSION: 2}


@dataclass(frozen=True)
class RingLayout:
    """Placement of the sensing units around the sleeve of one disk.

    sleeve_outer_diameter: sleeve outer diameter [mm].
    unit_spacing: centre-to-centre arc spacing of adjacent units [mm].
    unit_count: number of units on the ring.
    mount_disk_index: which vertebral disk carries the ring (1-based).
    first_unit_azimuth: azimuth of unit 0 in the disk frame [rad].
    """

    sleeve_outer_diameter: float
    unit_spacing: float
    unit_count: int = 4
    mount_disk_index: int = 1
    first_unit_azimuth: float = 0.0

    def __post_init__(self) -> None:
        if not self.sleeve_outer_diameter > 0.0:
            raise ValueError("sleeve_outer_diameter must be positive")
        if not self.unit_spacing > 0.0:
            raise ValueError("unit_spacing must be positive")
        if not (isinstance(self.unit_count, int) and self.unit_count >= 1):
            raise ValueError(f"unit_count must be a positive integer, got {self.unit_count}")
        if not (isinstance(self.mount_disk_index, int) and self.mount_disk_index >= 1):
            raise ValueError("mount_disk_index must be a positive integer")
        span = self.unit_spacing * (self.unit_count - 1)
        if span >= math.pi * self.sleeve_outer_diameter:
            raise ValueError(
                f"units span {span:.3g} mm of arc, exceeding the "
                f"{math.pi * self.sleeve_outer_diameter:.3g} mm circumference"
            )


@dataclass(frozen=True)
class ZoneThresholds:
    """Clearance thresholds [mm] separating safe / warning / intrusion zones."""

    d_warn: float
    d_intrude: float

    def __post_init__(self) -> None:
        if not 0.0 < self.d_intrude < self.d_warn:
            raise ValueError(
                f"need 0 < d_intrude < d_warn, got d_intrude={self.d_intrude}, d_warn={self.d_warn}"
            )


@dataclass(frozen=True)
class GapEstimate:
    """Calibrated gap of one channel: distance [mm], clamp status, timestamp [ms]."""

    channel: int
    distance: float
    status: GapStatus
    timestamp: float

    def __post_init__(self) -> None:
        if self.status is GapStatus.CONTACT and self.distance != 0.0:
            raise ValueError("contact estimates must report distance 0")
        if self.status is GapStatus.IN_RANGE and not self.distance > 0.0:
            raise ValueError("in-range estimates must report a positive distance")
        if self.distance < 0.0:
            raise ValueError(f"distance must be >= 0, got {self.distance}")


@dataclass(frozen=True)
class MapPoint:
    """Reconstructed obstacle point in world coordinates [mm]."""

    position: tuple[float, float, float]
    channel: int
    timestamp: float


@dataclass(frozen=True)
class Plane:
    """Tangent plane at an estimated gap: point on the plane + unit normal."""

    point: tuple[float, float, float]
    normal: tuple[float, float, float]

    def __post_init__(self) -> None:
        norm = math.sqrt(sum(c * c for c in self.normal))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"plane normal must be unit length, got |n|={norm:.8f}")


@dataclass(frozen=True)
class ObstacleMap:
    """Local obstacle map: retained points, per-channel planes and zones, stamp [ms].

    Channels never observed carry no plane and no zone entry; the map makes
    no claim about azimuths outside the instrumented arc.
    """

    points: tuple[MapPoint, ...] = ()
    planes: Mapping[int, Plane] = field(default_factory=dict)
    zones: Mapping[int, Zone] = field(default_factory=dict)
    stamp: float = -math.inf


def empty_map() -> ObstacleMap:
    return ObstacleMap()


def unit_azimuths(layout: RingLayout) -> tuple[float, ...]:
    """Disk-frame azimuth of every unit, uniformly spaced along the ring arc.

    The angular step is arc spacing over sleeve radius, 2*L_s/D_o.
    """
    step = 2.0 * layout.unit_spacing / layout.sleeve_outer_diameter
    return tuple(layout.first_unit_azimuth + i * step for i in range(layout.unit_count))


def observed_arc_deg(layout: RingLayout) -> float:
    """Azimuthal span between the outermost unit centres, in degrees."""
    azimuths = unit_azimuths(layout)
    return math.degrees(azimuths[-1] - azimuths[0])


def boresight(pose: Pose) -> np.ndarray:
    """Outward optical axis of a sensing-unit pose (its local x-axis)."""
    return pose.rotation[:, 0]


def sensor_world_pose(disk: DiskPose, layout: RingLayout, unit: int) -> Pose:
    """World pose of one sensing unit on the instrumented disk.

    The unit sits on the sleeve surface at its ring azimuth; its x-axis is
    the outward radial boresight and its z-axis stays along the disk axis.
    """
    if not 0 <= unit < layout.unit_count:
        raise ValueError(f"unit must be in 0..{layout.unit_count - 1}, got {unit}")
    azimuth = unit_azimuths(layout)[unit]
    rotation = disk.pose.rotation @ _rot_z(azimuth)
    radius = layout.sleeve_outer_diameter / 2.0
    position = disk.pose.position + radius * rotation[:, 0]
    return Pose(position, rotation)


def classify_zone(distance: float, thresholds: ZoneThresholds) -> Zone:
    """Proximity zone for a clearance; boundary values take the closer zone."""
    if distance < 0.0:
        raise ValueError(f"distance must be >= 0, got {distance}")
    if distance <= thresholds.d_intrude:
        return Zone.INTRUSION
    if distance <= thresholds.d_warn:
        return Zone.WARNING
    return Zone.SAFE


def reading_to_gap(
    voltage: float,
    calib: SensorCalibration,
    *,
    channel: int,
    timestamp: float,
) -> GapEstimate:
    """Clamp a filtered voltage [V] to a gap estimate.

    Saturation ends are resolved by curve orientation: for a falling curve
    (k < 0) high voltages mean contact and low voltages mean out of range,
    and vice versa for a rising curve. Every finite voltage maps to an
    estimate; the invertible band yields an in-range distance, clipped into
    (0, max_distance) at its ends.
    """
    if calib.k_slope < 0.0:
        near_contact = voltage >= calib.threshold_up
        past_range = voltage <= calib.threshold_low
    else:
        near_contact = voltage <= calib.threshold_low
        past_range = voltage >= calib.threshold_up
    if near_contact:
        return GapEstimate(channel, 0.0, GapStatus.CONTACT, timestamp)
    if past_range:
        return GapEstimate(channel, calib.max_distance, GapStatus.BEYOND_RANGE, timestamp)
    distance = invert_voltage(voltage, calib)
    if distance <= 0.0:
        return GapEstimate(channel, 0.0, GapStatus.CONTACT, timestamp)
    if distance >= calib.max_distance:
        return GapEstimate(channel, calib.max_distance, GapStatus.BEYOND_RANGE, timestamp)
    return GapEstimate(channel, distance, GapStatus.IN_RANGE, timestamp)


def update_map(
    gaps: Sequence[GapEstimate],
    poses: Sequence[Pose],
    thresholds: ZoneThresholds,
    prev: ObstacleMap,
    history_horizon_ms: float = DEFAULT_HISTORY_HORIZON_MS,
) -> ObstacleMap:
    """Merge one tick of gap estimates into the obstacle map.

    Contact and in-range gaps place an obstacle point and tangent plane at
    distance*boresight from the sensor (at the sensor itself for contact,
    which always forces the intrusion zone). Beyond-range gaps retire the
    channel's stale plane and mark it safe. Channels absent from `gaps` are
    left untouched. Points older than the history horizon are dropped.
    """
    if len(gaps) != len(poses):
        raise ValueError(f"{len(gaps)} gaps but {len(poses)} poses; inputs must align")
    stamp = prev.stamp
    planes = dict(prev.planes)
    zones = dict(prev.zones)
    fresh_points: list[MapPoint] = []
    for gap, pose in zip(gaps, poses):
        stamp = max(stamp, gap.timestamp)
        if gap.status is GapStatus.BEYOND_RANGE:
            planes.pop(gap.channel, None)
            zones[gap.channel] = Zone.SAFE
            continue
        axis = boresight(pose)
        point = tuple(float(c) for c in pose.position + gap.distance * axis)
        planes[gap.channel] = Plane(point, tuple(float(c) for c in axis))
        if gap.status is GapStatus.CONTACT:
            zones[gap.channel] = Zone.INTRUSION
        else:
            zones[gap.channel] = classify_zone(gap.distance, thresholds)
        fresh_points.append(MapPoint(point, gap.channel, gap.timestamp))
    cutoff = stamp - history_horizon_ms
    points = tuple(p for p in prev.points if p.timestamp > cutoff) + tuple(fresh_points)
    return ObstacleMap(points=points, planes=planes, zones=zones, stamp=stamp)
