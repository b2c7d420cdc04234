"""Synthetic lumen environment and scenario runner.

Ray-casts exact sensor-to-obstacle distances along each boresight, pushes
them through the forward sensor model with configurable noise, drives the
filtering + mapping pipeline tick by tick, and scores the estimates against
the exact distances (optionally against a motion-capture style reference
grid with bounded perturbation).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .filtering import ChannelFilter, RawSample
from .mapping import (
    GapEstimate,
    GapStatus,
    ObstacleMap,
    Plane,
    RingLayout,
    Zone,
    ZoneThresholds,
    empty_map,
    reading_to_gap,
    sensor_world_pose,
    update_map,
)
from .optical import (
    SensorCalibration,
    counts_to_volts,
    far_field_voltage,
    quantize_counts,
    response_voltage,
    volts_to_counts,
)
from .pcc import CableLengths, Pose, SegmentGeometry, config_from_cables, disk_pose

NOISE_KINDS = ("gaussian-iid", "ar1")

# Reference grid rate of the external position-tracking stand-in.
MOCAP_RATE_HZ = 180.0
MOCAP_ACCURACY_MM = 0.1

# AR(1) constants tuned so the quantized raw count stream has variance near
# 1.38 counts^2 and the 10-sample moving average lands in [0.30, 0.40].
DEFAULT_SENSOR_NOISE_SIGMA = math.sqrt(1.30)
DEFAULT_SENSOR_NOISE_AR = 0.5

Vec3 = tuple[float, float, float]
TrajectoryKey = tuple[float, Vec3]


def _as_unit(vec: Sequence[float], what: str) -> Vec3:
    norm = math.sqrt(sum(c * c for c in vec))
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"{what} must be unit length, got |v|={norm:.8f}")
    return tuple(float(c) for c in vec)


def _check_trajectory(trajectory: Sequence[TrajectoryKey]) -> tuple[TrajectoryKey, ...]:
    keys = tuple((float(t), tuple(float(c) for c in p)) for t, p in trajectory)
    for (t0, _), (t1, _) in zip(keys, keys[1:]):
        if t1 <= t0:
            raise ValueError("trajectory timestamps must be strictly increasing")
    return keys


def _interp_anchor(base: Vec3, trajectory: tuple[TrajectoryKey, ...], t_ms: float) -> np.ndarray:
    if not trajectory:
        return np.array(base)
    if t_ms <= trajectory[0][0]:
        return np.array(trajectory[0][1])
    if t_ms >= trajectory[-1][0]:
        return np.array(trajectory[-1][1])
    for (t0, p0), (t1, p1) in zip(trajectory, trajectory[1:]):
        if t0 <= t_ms <= t1:
            w = (t_ms - t0) / (t1 - t0)
            return (1.0 - w) * np.array(p0) + w * np.array(p1)
    raise AssertionError("unreachable: trajectory spans checked above")


@dataclass(frozen=True)
class PlaneObstacle:
    """Infinite plane through `point` with unit `normal`; the anchor may move."""

    point: Vec3
    normal: Vec3
    trajectory: tuple[TrajectoryKey, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "normal", _as_unit(self.normal, "plane normal"))
        object.__setattr__(self, "trajectory", _check_trajectory(self.trajectory))

    def ray_hit(self, origin: np.ndarray, direction: np.ndarray, t_ms: float) -> float | None:
        anchor = _interp_anchor(self.point, self.trajectory, t_ms)
        normal = np.array(self.normal)
        denom = float(direction @ normal)
        if abs(denom) < 1e-12:
            return None
        t = float((anchor - origin) @ normal) / denom
        return t if t >= 0.0 else None


@dataclass(frozen=True)
class SphereObstacle:
    center: Vec3
    radius: float
    trajectory: tuple[TrajectoryKey, ...] = ()

    def __post_init__(self) -> None:
        if not self.radius > 0.0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "trajectory", _check_trajectory(self.trajectory))

    def ray_hit(self, origin: np.ndarray, direction: np.ndarray, t_ms: float) -> float | None:
        center = _interp_anchor(self.center, self.trajectory, t_ms)
        offset = center - origin
        along = float(offset @ direction)
        disc = along * along - float(offset @ offset) + self.radius * self.radius
        if disc < 0.0:
            return None
        root = math.sqrt(disc)
        near = along - root
        if near >= 0.0:
            return near
        far = along + root
        return far if far >= 0.0 else None


@dataclass(frozen=True)
class CylinderObstacle:
    """Infinite cylinder around the axis through `axis_point` along `axis_direction`."""

    axis_point: Vec3
    axis_direction: Vec3
    radius: float
    trajectory: tuple[TrajectoryKey, ...] = ()

    def __post_init__(self) -> None:
        if not self.radius > 0.0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "axis_direction", _as_unit(self.axis_direction, "cylinder axis"))
        object.__setattr__(self, "trajectory", _check_trajectory(self.trajectory))

    def ray_hit(self, origin: np.ndarray, direction: np.ndarray, t_ms: float) -> float | None:
        anchor = _interp_anchor(self.axis_point, self.trajectory, t_ms)
        axis = np.array(self.axis_direction)
        rel = origin - anchor
        rel_perp = rel - float(rel @ axis) * axis
        dir_perp = direction - float(direction @ axis) * axis
        a = float(dir_perp @ dir_perp)
        if a < 1e-24:
            return None  # ray parallel to the axis never crosses the surface
        b = 2.0 * float(rel_perp @ dir_perp)
        c = float(rel_perp @ rel_perp) - self.radius * self.radius
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            return None
        root = math.sqrt(disc)
        near = (-b - root) / (2.0 * a)
        if near >= 0.0:
            return near
        far = (-b + root) / (2.0 * a)
        return far if far >= 0.0 else None


Obstacle = PlaneObstacle | SphereObstacle | CylinderObstacle


@dataclass(frozen=True)
class NoiseModel:
    """Additive reading noise in ADC counts.

    `sigma` is the stationary standard deviation; for the "ar1" kind the
    innovation is scaled by sqrt(1 - ar_coefficient^2) so the long-run
    variance stays sigma^2. Outliers add +/- outlier_magnitude with
    probability outlier_rate per sample.
    """

    kind: str = "gaussian-iid"
    sigma: float = 0.0
    ar_coefficient: float = 0.0
    outlier_rate: float = 0.0
    outlier_magnitude: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not 0.0 <= self.ar_coefficient < 1.0:
            raise ValueError(f"ar_coefficient must be in [0, 1), got {self.ar_coefficient}")
        if self.kind == "gaussian-iid" and self.ar_coefficient != 0.0:
            raise ValueError("gaussian-iid noise takes no ar_coefficient")
        if not 0.0 <= self.outlier_rate < 1.0:
            raise ValueError(f"outlier_rate must be in [0, 1), got {self.outlier_rate}")
        if self.outlier_magnitude < 0.0:
            raise ValueError("outlier_magnitude must be >= 0")


DEFAULT_SENSOR_NOISE = NoiseModel(
    kind="ar1",
    sigma=DEFAULT_SENSOR_NOISE_SIGMA,
    ar_coefficient=DEFAULT_SENSOR_NOISE_AR,
)

NO_NOISE = NoiseModel()


class NoiseStream:
    """Per-channel noise generator; draws from a shared rng in a fixed order."""

    def __init__(self, model: NoiseModel, rng: np.random.Generator):
        self._model = model
        self._rng = rng
        if model.kind == "ar1" and model.sigma > 0.0:
            self._state = float(rng.normal(0.0, model.sigma))  # stationary start
        else:
            self._state = 0.0

    def sample(self) -> float:
        model = self._model
        if model.sigma > 0.0:
            if model.kind == "ar1":
                innovation_sd = model.sigma * math.sqrt(1.0 - model.ar_coefficient**2)
                self._state = model.ar_coefficient * self._state + float(
                    self._rng.normal(0.0, innovation_sd)
                )
                value = self._state
            else:
                value = float(self._rng.normal(0.0, model.sigma))
        else:
            value = 0.0
        if model.outlier_rate > 0.0 and float(self._rng.random()) < model.outlier_rate:
            sign = 1.0 if float(self._rng.random()) < 0.5 else -1.0
            value += sign * model.outlier_magnitude
        return value


def raycast_distance(
    sensor_pose: Pose,
    obstacles: Sequence[Obstacle],
    t_ms: float,
    max_distance: float,
) -> float | None:
    """Smallest boresight-ray distance to any obstacle surface, or None beyond range."""
    origin = sensor_pose.position
    direction = sensor_pose.rotation[:, 0]
    best: float | None = None
    for obstacle in obstacles:
        hit = obstacle.ray_hit(origin, direction, t_ms)
        if hit is not None and (best is None or hit < best):
            best = hit
    if best is None or best > max_distance:
        return None
    return best


def synthesize_reading(
    true_distance: float | None,
    calib: SensorCalibration,
    noise: NoiseStream,
) -> int:
    """Quantized ADC reading for a true gap (None means nothing in range)."""
    if true_distance is None:
        volts = far_field_voltage(calib)
    else:
        volts = response_voltage(true_distance, calib)
    return quantize_counts(volts_to_counts(volts) + noise.sample())


def ground_truth_reference(
    obstacles: Sequence[Obstacle],
    sensor_pose: Pose,
    t_ms: float,
    max_distance: float,
    mocap_noise_mm: float | None = None,
    rng: np.random.Generator | None = None,
) -> float | None:
    """Exact ray-cast distance, optionally perturbed like an optical tracker.

    The perturbation is uniform in +/- mocap_noise_mm, floored at zero.
    """
    distance = raycast_distance(sensor_pose, obstacles, t_ms, max_distance)
    if distance is None or not mocap_noise_mm:
        return distance
    if rng is None:
        raise ValueError("a generator is required when mocap noise is enabled")
    return max(distance + float(rng.uniform(-mocap_noise_mm, mocap_noise_mm)), 0.0)


@dataclass(frozen=True)
class Scenario:
    """Everything one run needs; a fixed seed makes the run bit-reproducible."""

    name: str
    length: float
    geometry: SegmentGeometry
    ring: RingLayout
    calibrations: tuple[SensorCalibration, ...]
    noise: NoiseModel
    obstacles: tuple[Obstacle, ...]
    actuation: tuple[tuple[float, Vec3], ...]
    duration_ms: float
    rate_hz: float = 100.0
    seed: int = 0
    zones: ZoneThresholds = ZoneThresholds(d_warn=10.0, d_intrude=3.0)
    mocap_noise_mm: float | None = None
    history_horizon_ms: float = 2000.0

    def __post_init__(self) -> None:
        if not self.duration_ms > 0.0:
            raise ValueError("duration_ms must be positive")
        if not self.rate_hz > 0.0:
            raise ValueError("rate_hz must be positive")
        if len(self.calibrations) < self.ring.unit_count:
            raise ValueError(
                f"{self.ring.unit_count} ring units but only "
                f"{len(self.calibrations)} calibrations"
            )
        if self.ring.mount_disk_index > self.geometry.disk_count:
            raise ValueError(
                f"mount disk {self.ring.mount_disk_index} exceeds "
                f"disk count {self.geometry.disk_count}"
            )
        if not self.actuation:
            raise ValueError("actuation schedule must have at least one keyframe")
        for (t0, _), (t1, _) in zip(self.actuation, self.actuation[1:]):
            if t1 <= t0:
                raise ValueError("actuation timestamps must be strictly increasing")
        if self.mocap_noise_mm is not None and self.mocap_noise_mm < 0.0:
            raise ValueError("mocap_noise_mm must be >= 0")
        if not self.history_horizon_ms > 0.0:
            raise ValueError("history_horizon_ms must be positive")

    def cables_at(self, t_ms: float) -> CableLengths:
        keys = self.actuation
        if t_ms <= keys[0][0]:
            return CableLengths(*keys[0][1])
        if t_ms >= keys[-1][0]:
            return CableLengths(*keys[-1][1])
        for (t0, q0), (t1, q1) in zip(keys, keys[1:]):
            if t0 <= t_ms <= t1:
                w = (t_ms - t0) / (t1 - t0)
                return CableLengths(*((1.0 - w) * a + w * b for a, b in zip(q0, q1)))
        raise AssertionError("unreachable: actuation spans checked above")

    def tick_count(self) -> int:
        return int(round(self.duration_ms * self.rate_hz / 1000.0))

    def tick_interval_ms(self) -> float:
        return 1000.0 / self.rate_hz


def sensor_poses_at(scenario: Scenario, t_ms: float) -> tuple[Pose, ...]:
    """World pose of every sensing unit at simulation time t."""
    cfg = config_from_cables(scenario.cables_at(t_ms), scenario.geometry, scenario.length)
    disk = disk_pose(scenario.ring.mount_disk_index, cfg, scenario.geometry)
    return tuple(
        sensor_world_pose(disk, scenario.ring, unit) for unit in range(scenario.ring.unit_count)
    )


def validate_scenario(scenario: Scenario) -> None:
    """Reject scenarios that would fail mid-run.

    Sweeps the actuation schedule across every tick so an infeasible bend
    (non-positive cable, bend angle beyond pi) surfaces before execution.
    """
    dt = scenario.tick_interval_ms()
    for i in range(scenario.tick_count()):
        t = i * dt
        try:
            cables = scenario.cables_at(t)
            config_from_cables(cables, scenario.geometry, scenario.length)
        except ValueError as exc:
            raise ValueError(f"actuation infeasible at t={t:.1f} ms: {exc}") from exc


@dataclass(frozen=True)
class ZoneTransition:
    timestamp: float
    channel: int
    previous: Zone
    current: Zone


@dataclass(frozen=True)
class TickRecord:
    """Everything observable at one tick, per channel."""

    t_ms: float
    true_mm: tuple[float | None, ...]
    raw_counts: tuple[int, ...]
    filtered_counts: tuple[float, ...]
    est_mm: tuple[float, ...]
    status: tuple[GapStatus, ...]
    zone: tuple[Zone, ...]
    planes: tuple[Plane | None, ...]
    latency_ms: float


@dataclass(frozen=True)
class RunMetrics:
    """Per-channel accuracy plus pipeline latency percentiles.

    RMSE and max error cover only ticks whose estimate was in range and
    whose reference distance existed; channels with no such tick carry None.
    """

    per_channel_rmse: tuple[float | None, ...]
    per_channel_max_abs_error: tuple[float | None, ...]
    in_range_ticks: tuple[int, ...]
    latency_median_ms: float
    latency_p95_ms: float
    latency_max_ms: float
    zone_transitions: tuple[ZoneTransition, ...]


@dataclass(frozen=True)
class RunResult:
    scenario: Scenario
    metrics: RunMetrics
    ticks: tuple[TickRecord, ...]
    final_map: ObstacleMap


def _percentile(sorted_values: list[float], fraction: float) -> float:
    pos = (len(sorted_values) - 1) * fraction
    lo = int(pos)
    frac = pos - lo
    if frac == 0.0:
        return sorted_values[lo]
    return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo])


def _mocap_grid(
    scenario: Scenario, rng: np.random.Generator
) -> tuple[float, list[list[float | None]]]:
    """Reference distances on the tracker's own time grid, one row per gridpoint."""
    grid_dt = 1000.0 / MOCAP_RATE_HZ
    count = max(int(math.ceil(scenario.duration_ms / grid_dt)), 1)
    rows: list[list[float | None]] = []
    for j in range(count):
        t = j * grid_dt
        poses = sensor_poses_at(scenario, t)
        row: list[float | None] = []
        for unit, pose in enumerate(poses):
            row.append(
                ground_truth_reference(
                    scenario.obstacles,
                    pose,
                    t,
                    scenario.calibrations[unit].max_distance,
                    scenario.mocap_noise_mm,
                    rng,
                )
            )
        rows.append(row)
    return grid_dt, rows


def run_scenario(scenario: Scenario) -> RunResult:
    """Drive the full pipeline over every tick and score it.

    Per tick: actuation -> segment config -> disk and sensor poses, exact
    ray-cast distances, noisy quantized readings, per-channel filtering,
    voltage-to-gap clamping, and the obstacle-map update. Latency timing
    wraps the kinematics, filtering, and mapping stages only; reading
    synthesis stands in for hardware and is excluded.
    """
    validate_scenario(scenario)
    units = scenario.ring.unit_count
    seed_root = np.random.SeedSequence(scenario.seed)
    noise_seed, mocap_seed = seed_root.spawn(2)
    noise_rng = np.random.default_rng(noise_seed)
    streams = [NoiseStream(scenario.noise, noise_rng) for _ in range(units)]
    filters = [ChannelFilter() for _ in range(units)]

    mocap: tuple[float, list[list[float | None]]] | None = None
    if scenario.mocap_noise_mm is not None:
        mocap = _mocap_grid(scenario, np.random.default_rng(mocap_seed))

    dt = scenario.tick_interval_ms()
    obstacle_map = empty_map()
    records: list[TickRecord] = []
    errors: list[list[float]] = [[] for _ in range(units)]
    latencies: list[float] = []
    transitions: list[ZoneTransition] = []
    last_zone: list[Zone | None] = [None] * units

    for i in range(scenario.tick_count()):
        t = i * dt

        start = time.perf_counter()
        poses = sensor_poses_at(scenario, t)
        kinematics_done = time.perf_counter()

        true_distances: list[float | None] = []
        raw: list[int] = []
        for unit in range(units):
            distance = raycast_distance(
                poses[unit], scenario.obstacles, t, scenario.calibrations[unit].max_distance
            )
            true_distances.append(distance)
            raw.append(synthesize_reading(distance, scenario.calibrations[unit], streams[unit]))

        filter_start = time.perf_counter()
        filtered = [
            filters[unit].push_sample(RawSample(t, unit, float(raw[unit])))
            for unit in range(units)
        ]
        gaps = [
            reading_to_gap(
                counts_to_volts(filtered[unit].value),
                scenario.calibrations[unit],
                channel=unit,
                timestamp=t,
            )
            for unit in range(units)
        ]
        obstacle_map = update_map(
            gaps, poses, scenario.zones, obstacle_map, scenario.history_horizon_ms
        )
        done = time.perf_counter()
        latency_ms = ((kinematics_done - start) + (done - filter_start)) * 1000.0
        latencies.append(latency_ms)

        for unit in range(units):
            if gaps[unit].status is not GapStatus.IN_RANGE:
                continue
            if mocap is not None:
                grid_dt, rows = mocap
                j = min(max(int(round(t / grid_dt)), 0), len(rows) - 1)
                reference = rows[j][unit]
            else:
                reference = true_distances[unit]
            if reference is not None:
                errors[unit].append(gaps[unit].distance - reference)

        zones_now = []
        for unit in range(units):
            zone = obstacle_map.zones[unit]
            previous = last_zone[unit]
            if previous is not None and zone != previous:
                transitions.append(ZoneTransition(t, unit, previous, zone))
            last_zone[unit] = zone
            zones_now.append(zone)

        records.append(
            TickRecord(
                t_ms=t,
                true_mm=tuple(true_distances),
                raw_counts=tuple(raw),
                filtered_counts=tuple(sample.value for sample in filtered),
                est_mm=tuple(gap.distance for gap in gaps),
                status=tuple(gap.status for gap in gaps),
                zone=tuple(zones_now),
                planes=tuple(obstacle_map.planes.get(unit) for unit in range(units)),
                latency_ms=latency_ms,
            )
        )

    rmse: list[float | None] = []
    max_err: list[float | None] = []
    for unit in range(units):
        if errors[unit]:
            arr = np.array(errors[unit])
            rmse.append(float(np.sqrt(np.mean(arr**2))))
            max_err.append(float(np.max(np.abs(arr))))
        else:
            rmse.append(None)
            max_err.append(None)
    ordered = sorted(latencies)
    metrics = RunMetrics(
        per_channel_rmse=tuple(rmse),
        per_channel_max_abs_error=tuple(max_err),
        in_range_ticks=tuple(len(errors[unit]) for unit in range(units)),
        latency_median_ms=_percentile(ordered, 0.5),
        latency_p95_ms=_percentile(ordered, 0.95),
        latency_max_ms=ordered[-1],
        zone_transitions=tuple(transitions),
    )
    return RunResult(scenario, metrics, tuple(records), obstacle_map)
