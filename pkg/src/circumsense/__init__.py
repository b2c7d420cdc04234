"""Circumferential proximity sensing stack for cable-driven continuum robots."""

from .filtering import ChannelFilter, FilteredSample, RawSample, sqi, sqi_improvement, variance
from .mapping import (
    GapEstimate,
    GapStatus,
    MapPoint,
    ObstacleMap,
    Plane,
    RingLayout,
    Zone,
    ZoneThresholds,
    classify_zone,
    empty_map,
    observed_arc_deg,
    reading_to_gap,
    sensor_world_pose,
    unit_azimuths,
    update_map,
)
from .optical import (
    CalibrationError,
    CalibrationSample,
    FitConvergenceError,
    FitReport,
    SensorCalibration,
    VoltageDomainError,
    VoltageOutOfRange,
    derive_thresholds,
    fit_calibration,
    invert_voltage,
    response_voltage,
)
from .pcc import (
    CableLengths,
    DiskPose,
    Pose,
    SegmentConfig,
    SegmentGeometry,
    cables_from_config,
    config_from_cables,
    disk_pose,
    forward_segment_pose,
)
from .sim import (
    CylinderObstacle,
    NoiseModel,
    PlaneObstacle,
    RunMetrics,
    RunResult,
    Scenario,
    SphereObstacle,
    ground_truth_reference,
    raycast_distance,
    run_scenario,
    synthesize_reading,
)

__version__ = "0.1.0"
