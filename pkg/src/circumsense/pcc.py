"""Constant-curvature kinematics for a cable-driven bending segment.

A segment bends as a single circular arc described by a bend angle, a bend
direction, and its arc length. Three drive cables at fixed angular spacing
set the configuration; intermediate vertebral disks sit at equal arc-length
fractions along the arc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_THIRDS_PI = 2.0 * math.pi / 3.0

# Below this bend angle the closed-form arc terms (1-cos)/theta and
# sin(theta)/theta lose precision; switch to a 2nd-order series.
SERIES_SWITCH_RAD = 1e-6

_ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class SegmentConfig:
    """One segment's bend angle [rad], bend direction [rad], arc length [mm]."""

    theta: float
    phi: float
    length: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must be in [0, pi], got {self.theta}")
        if not -math.pi <= self.phi <= math.pi:
            raise ValueError(f"phi must be in [-pi, pi], got {self.phi}")
        if not self.length > 0.0:
            raise ValueError(f"length must be positive, got {self.length}")


@dataclass(frozen=True)
class SegmentGeometry:
    """Cable routing geometry of a segment.

    cable_radius: pitch-circle radius of the drive cables [mm].
    cable_phase: angular spacing between adjacent cables [rad].
    disk_count: number of vertebral disks subdividing the arc.
    """

    cable_radius: float
    cable_phase: float = TWO_THIRDS_PI
    disk_count: int = 1

    def __post_init__(self) -> None:
        if not self.cable_radius > 0.0:
            raise ValueError(f"cable_radius must be positive, got {self.cable_radius}")
        if not 0.0 < self.cable_phase <= math.pi:
            raise ValueError(f"cable_phase must be in (0, pi], got {self.cable_phase}")
        if not (isinstance(self.disk_count, int) and self.disk_count >= 1):
            raise ValueError(f"disk_count must be a positive integer, got {self.disk_count}")


@dataclass(frozen=True)
class CableLengths:
    """Lengths of the three drive cables [mm]."""

    q1: float
    q2: float
    q3: float

    def __post_init__(self) -> None:
        for name in ("q1", "q2", "q3"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.q1, self.q2, self.q3)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform (world <- local): position [mm] and a proper rotation."""

    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self) -> None:
        pos = np.array(self.position, dtype=float).reshape(3)
        rot = np.array(self.rotation, dtype=float).reshape(3, 3)
        err = float(np.abs(rot.T @ rot - np.eye(3)).max())
        if err > _ORTHONORMAL_TOL:
            raise ValueError(f"rotation is not orthonormal (max deviation {err:.3e})")
        if abs(float(np.linalg.det(rot)) - 1.0) > _ORTHONORMAL_TOL:
            raise ValueError("rotation must be proper (det = +1)")
        pos.setflags(write=False)
        rot.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rotation", rot)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.eye(3))

    def compose(self, other: "Pose") -> "Pose":
        """Chain transforms: self maps other's frame into this pose's frame."""
        return Pose(
            self.position + self.rotation @ other.position,
            self.rotation @ other.rotation,
        )


@dataclass(frozen=True)
class DiskPose:
    """Pose of one vertebral disk plus its arc parameters (x, y, z, bend, direction)."""

    index: int
    pose: Pose
    params: tuple[float, float, float, float, float]


def _rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def forward_segment_pose(cfg: SegmentConfig) -> Pose:
    """Tip pose of a segment bent as a single circular arc.

    The disk z-axis stays tangent to the backbone: the rotation is
    Rz(phi) @ Ry(theta) @ Rz(-phi), which reduces to the identity for a
    straight segment.
    """
    theta, phi, length = cfg.theta, cfg.phi, cfg.length
    if theta < SERIES_SWITCH_RAD:
        radial = length * (theta / 2.0 - theta**3 / 24.0)
        axial = length * (1.0 - theta * theta / 6.0)
    else:
        radius = length / theta
        radial = radius * (1.0 - math.cos(theta))
        axial = radius * math.sin(theta)
    position = np.array([radial * math.cos(phi), radial * math.sin(phi), axial])
    rotation = _rot_z(phi) @ _rot_y(theta) @ _rot_z(-phi)
    return Pose(position, rotation)


def cables_from_config(cfg: SegmentConfig, geom: SegmentGeometry) -> CableLengths:
    """Cable lengths that realise a segment configuration.

    Raises ValueError when the bend is geometrically infeasible (a cable
    length would go non-positive).
    """
    lengths = []
    for i in range(3):
        q = cfg.length - geom.cable_radius * cfg.theta * math.cos(cfg.phi + i * geom.cable_phase)
        if q <= 0.0:
            raise ValueError(
                f"cable {i + 1} length {q:.6g} mm is non-positive; bend is infeasible"
            )
        lengths.append(q)
    return CableLengths(*lengths)


def config_from_cables(cables: CableLengths, geom: SegmentGeometry, length: float) -> SegmentConfig:
    """Segment configuration realised by three cable lengths.

    Only exact for three cables spaced 2*pi/3 apart; other spacings are
    rejected rather than silently inverted wrong. When all cables are equal
    the segment is straight and the bend direction is fixed to 0.
    """
    if abs(geom.cable_phase - TWO_THIRDS_PI) > 1e-9:
        raise ValueError("cable-length inversion requires three cables spaced 2*pi/3 apart")
    q1, q2, q3 = cables.as_tuple()
    radicand = q1 * q1 + q2 * q2 + q3 * q3 - q1 * q2 - q2 * q3 - q1 * q3
    radicand = max(radicand, 0.0)  # clamp rounding noise; analytically >= 0
    theta = 2.0 * math.sqrt(radicand) / (3.0 * geom.cable_radius)
    if theta == 0.0:
        return SegmentConfig(0.0, 0.0, length)
    phi = math.atan2(math.sqrt(3.0) * (q2 - q3), q2 + q3 - 2.0 * q1)
    return SegmentConfig(theta, phi, length)


def disk_pose(index: int, cfg: SegmentConfig, geom: SegmentGeometry) -> DiskPose:
    """Pose of disk `index` (1..disk_count), at arc-length fraction index/disk_count."""
    if not (isinstance(index, int) and 1 <= index <= geom.disk_count):
        raise ValueError(f"disk index must be in 1..{geom.disk_count}, got {index}")
    fraction = index / geom.disk_count
    sub = SegmentConfig(fraction * cfg.theta, cfg.phi, fraction * cfg.length)
    pose = forward_segment_pose(sub)
    x, y, z = (float(v) for v in pose.position)
    return DiskPose(index, pose, (x, y, z, sub.theta, sub.phi))
