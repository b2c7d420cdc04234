"""File formats and the telemetry line codec.

Everything is text-first and versioned: stream frames are one line each,
scenarios and calibrations are strict JSON documents (unknown keys are
rejected), traces and map exports are commented CSV. Writes go through a
write-temp-then-rename helper so failures never leave partial files.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from .filtering import FilteredSample
from .mapping import (
    GapStatus,
    Plane,
    RingLayout,
    Zone,
    ZoneThresholds,
    observed_arc_deg,
)
from .optical import ADC_MAX, CalibrationSample, SensorCalibration
from .pcc import SegmentGeometry, TWO_THIRDS_PI
from .sim import (
    CylinderObstacle,
    NoiseModel,
    Obstacle,
    PlaneObstacle,
    RunResult,
    Scenario,
    SphereObstacle,
    TickRecord,
)

TRACE_FORMAT_VERSION = 1
SCENARIO_FORMAT_VERSION = 1
CALIBRATION_FORMAT_VERSION = 1

FRAME_FLAGS = ("raw", "filtered")

_FRAME_PATTERN = re.compile(
    r"^t=(?P<t>\d+) ch=(?P<ch>\d+) v=(?P<v>[0-9]+(?:\.[0-9]+(?:e[+-]?[0-9]+)?)?) "
    r"f=(?P<f>raw|filtered)$"
)


class FormatError(Exception):
    """A document or line failed validation; the message names the location."""


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename into place."""
    target = Path(path)
    handle = tempfile.NamedTemporaryFile(
        "w", dir=target.parent, prefix=target.name + ".", suffix=".tmp", delete=False
    )
    try:
        with handle as fh:
            fh.write(text)
        os.replace(handle.name, target)
    except BaseException:
        try:
            os.unlink(handle.name)
        except OSError:
            pass
        raise


@dataclass(frozen=True)
class StreamFrame:
    """One telemetry reading: timestamp [ms], channel, ADC value, raw/filtered flag."""

    timestamp: int
    channel: int
    value: int | float
    flag: str = "raw"

    def __post_init__(self) -> None:
        if not (isinstance(self.timestamp, int) and self.timestamp >= 0):
            raise ValueError(f"timestamp must be a non-negative integer, got {self.timestamp}")
        if not (isinstance(self.channel, int) and 0 <= self.channel <= 255):
            raise ValueError(f"channel must be in 0..255, got {self.channel}")
        if isinstance(self.value, bool) or not isinstance(self.value, (int, float)):
            raise ValueError(f"value must be a number, got {self.value!r}")
        if not 0 <= self.value <= ADC_MAX:
            raise ValueError(f"value must be in 0..{ADC_MAX}, got {self.value}")
        if self.flag not in FRAME_FLAGS:
            raise ValueError(f"flag must be one of {FRAME_FLAGS}, got {self.flag!r}")


def encode_frame(frame: StreamFrame) -> str:
    value = repr(frame.value) if isinstance(frame.value, float) else str(frame.value)
    return f"t={frame.timestamp} ch={frame.channel} v={value} f={frame.flag}"


def decode_frame(line: str) -> StreamFrame:
    match = _FRAME_PATTERN.match(line.strip())
    if match is None:
        raise FormatError(f"malformed frame line: {line.strip()!r}")
    raw_value = match.group("v")
    value: int | float = float(raw_value) if ("." in raw_value or "e" in raw_value) else int(raw_value)
    try:
        return StreamFrame(
            timestamp=int(match.group("t")),
            channel=int(match.group("ch")),
            value=value,
            flag=match.group("f"),
        )
    except ValueError as exc:
        raise FormatError(f"invalid frame {line.strip()!r}: {exc}") from exc


def read_frames(path: str | Path) -> list[StreamFrame]:
    frames = []
    for number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            frames.append(decode_frame(line))
        except FormatError as exc:
            raise FormatError(f"{path}:{number}: {exc}") from exc
    return frames


def write_frames(path: str | Path, frames: Iterable[StreamFrame]) -> None:
    atomic_write_text(path, "".join(encode_frame(f) + "\n" for f in frames))


# --- calibration ------------------------------------------------------------


def parse_calibration_csv(path: str | Path) -> list[list[CalibrationSample]]:
    """Per-unit calibration samples from a CSV with columns distance_mm, unit0_v, ...

    Voltages are expected in volts (count-to-volt conversion belongs to the
    acquisition side). Malformed cells are reported with their line number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        header = [name.strip() for name in header]
        if not header or header[0] != "distance_mm":
            raise FormatError(f"{path}: first column must be distance_mm, got {header[:1]}")
        expected = [f"unit{i}_v" for i in range(len(header) - 1)]
        if len(expected) == 0 or header[1:] != expected:
            raise FormatError(
                f"{path}: voltage columns must be unit0_v, unit1_v, ... got {header[1:]}"
            )
        per_unit: list[list[CalibrationSample]] = [[] for _ in expected]
        for number, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}:{number}: expected {len(header)} cells, got {len(row)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise FormatError(f"{path}:{number}: non-numeric cell in {row}") from None
            try:
                for unit, voltage in enumerate(values[1:]):
                    per_unit[unit].append(CalibrationSample(values[0], voltage))
            except ValueError as exc:
                raise FormatError(f"{path}:{number}: {exc}") from exc
    if not per_unit[0]:
        raise FormatError(f"{path}: no data rows")
    return per_unit


@dataclass(frozen=True)
class CalibrationRecord:
    unit_id: int
    calibration: SensorCalibration
    r_squared: float

    def __post_init__(self) -> None:
        if self.unit_id < 0:
            raise ValueError("unit_id must be >= 0")
        if self.r_squared > 1.0:
            raise ValueError("r_squared cannot exceed 1")


_CALIBRATION_FIELDS = (
    "unit_id",
    "v_max",
    "k_slope",
    "delta_z0",
    "epsilon",
    "threshold_low",
    "threshold_up",
    "max_distance",
    "r_squared",
)


def save_calibration_file(path: str | Path, records: Sequence[CalibrationRecord]) -> None:
    units = []
    for record in records:
        calib = record.calibration
        units.append(
            {
                "unit_id": record.unit_id,
                "v_max": calib.v_max,
                "k_slope": calib.k_slope,
                "delta_z0": calib.delta_z0,
                "epsilon": calib.epsilon,
                "threshold_low": calib.threshold_low,
                "threshold_up": calib.threshold_up,
                "max_distance": calib.max_distance,
                "r_squared": record.r_squared,
            }
        )
    document = {"format_version": CALIBRATION_FORMAT_VERSION, "units": units}
    atomic_write_text(path, json.dumps(document, indent=2) + "\n")


def load_calibration_file(path: str | Path) -> list[CalibrationRecord]:
    document = _load_json(path)
    _check_keys(document, f"{path}", required={"format_version", "units"})
    _require_version(document, CALIBRATION_FORMAT_VERSION, path)
    units = document["units"]
    if not isinstance(units, list) or not units:
        raise FormatError(f"{path}: units must be a nonempty list")
    records = []
    seen: set[int] = set()
    for index, entry in enumerate(units):
        context = f"{path}: units[{index}]"
        _check_keys(entry, context, required=set(_CALIBRATION_FIELDS))
        unit_id = _get_int(entry, "unit_id", context)
        if unit_id in seen:
            raise FormatError(f"{context}: duplicate unit_id {unit_id}")
        seen.add(unit_id)
        try:
            calibration = SensorCalibration(
                v_max=_get_number(entry, "v_max", context),
                k_slope=_get_number(entry, "k_slope", context),
                delta_z0=_get_number(entry, "delta_z0", context),
                epsilon=_get_number(entry, "epsilon", context),
                threshold_low=_get_number(entry, "threshold_low", context),
                threshold_up=_get_number(entry, "threshold_up", context),
                max_distance=_get_number(entry, "max_distance", context),
            )
            records.append(
                CalibrationRecord(unit_id, calibration, _get_number(entry, "r_squared", context))
            )
        except ValueError as exc:
            raise FormatError(f"{context}: {exc}") from exc
    records.sort(key=lambda record: record.unit_id)
    return records


# --- scenario ---------------------------------------------------------------


def _load_json(path: str | Path) -> dict:
    try:
        document = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(document, dict):
        raise FormatError(f"{path}: top level must be an object")
    return document


def _require_version(document: dict, expected: int, path: str | Path) -> None:
    version = document.get("format_version")
    if version != expected:
        raise FormatError(f"{path}: format_version must be {expected}, got {version!r}")


def _check_keys(obj: Any, context: str, required: set[str], optional: set[str] = frozenset()) -> None:
    if not isinstance(obj, dict):
        raise FormatError(f"{context}: expected an object, got {type(obj).__name__}")
    missing = required - obj.keys()
    if missing:
        raise FormatError(f"{context}: missing keys {sorted(missing)}")
    unknown = obj.keys() - required - optional
    if unknown:
        raise FormatError(f"{context}: unknown keys {sorted(unknown)}")


def _get_number(obj: dict, key: str, context: str) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise FormatError(f"{context}: {key} must be a finite number, got {value!r}")
    return float(value)


def _get_int(obj: dict, key: str, context: str) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise FormatError(f"{context}: {key} must be an integer, got {value!r}")
    return value


def _get_vec3(obj: dict, key: str, context: str) -> tuple[float, float, float]:
    value = obj[key]
    if not isinstance(value, list) or len(value) != 3:
        raise FormatError(f"{context}: {key} must be a list of 3 numbers")
    out = []
    for component in value:
        if isinstance(component, bool) or not isinstance(component, (int, float)):
            raise FormatError(f"{context}: {key} must contain numbers only")
        out.append(float(component))
    return tuple(out)


def _parse_trajectory(entry: dict, context: str) -> tuple[tuple[float, tuple[float, float, float]], ...]:
    if "trajectory" not in entry:
        return ()
    trajectory = entry["trajectory"]
    if not isinstance(trajectory, list):
        raise FormatError(f"{context}: trajectory must be a list")
    keys = []
    for index, key in enumerate(trajectory):
        key_context = f"{context}: trajectory[{index}]"
        _check_keys(key, key_context, required={"t", "position"})
        keys.append((_get_number(key, "t", key_context), _get_vec3(key, "position", key_context)))
    return tuple(keys)


def _parse_obstacle(entry: dict, context: str) -> Obstacle:
    if not isinstance(entry, dict) or "shape" not in entry:
        raise FormatError(f"{context}: obstacle needs a shape")
    shape = entry["shape"]
    try:
        if shape == "plane":
            _check_keys(entry, context, {"shape", "point", "normal"}, {"trajectory"})
            return PlaneObstacle(
                point=_get_vec3(entry, "point", context),
                normal=_get_vec3(entry, "normal", context),
                trajectory=_parse_trajectory(entry, context),
            )
        if shape == "sphere":
            _check_keys(entry, context, {"shape", "center", "radius"}, {"trajectory"})
            return SphereObstacle(
                center=_get_vec3(entry, "center", context),
                radius=_get_number(entry, "radius", context),
                trajectory=_parse_trajectory(entry, context),
            )
        if shape == "cylinder":
            _check_keys(
                entry, context, {"shape", "axis_point", "axis_direction", "radius"}, {"trajectory"}
            )
            return CylinderObstacle(
                axis_point=_get_vec3(entry, "axis_point", context),
                axis_direction=_get_vec3(entry, "axis_direction", context),
                radius=_get_number(entry, "radius", context),
                trajectory=_parse_trajectory(entry, context),
            )
    except ValueError as exc:
        raise FormatError(f"{context}: {exc}") from exc
    raise FormatError(f"{context}: unknown shape {shape!r}")


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario document, loading its calibration file.

    calibration_ref resolves relative to the scenario file. The ring's
    channels 0..units-1 must all be present in the calibration file.
    """
    path = Path(path)
    document = _load_json(path)
    _check_keys(
        document,
        str(path),
        required={
            "format_version",
            "robot",
            "ring",
            "calibration_ref",
            "noise",
            "obstacles",
            "actuation",
            "run",
            "zones",
        },
    )
    _require_version(document, SCENARIO_FORMAT_VERSION, path)

    robot = document["robot"]
    _check_keys(robot, f"{path}: robot", {"L", "r", "eta", "mount_disk"}, {"xi"})
    ring_doc = document["ring"]
    _check_keys(ring_doc, f"{path}: ring", {"D_o", "L_s", "units"}, {"first_azimuth"})
    run = document["run"]
    _check_keys(
        run,
        f"{path}: run",
        {"duration", "rate", "seed"},
        {"mocap_noise", "history_horizon"},
    )
    zones_doc = document["zones"]
    _check_keys(zones_doc, f"{path}: zones", {"d_warn", "d_intrude"})
    noise_doc = document["noise"]
    _check_keys(
        noise_doc,
        f"{path}: noise",
        {"kind", "sigma"},
        {"ar_coefficient", "outlier_rate", "outlier_magnitude"},
    )

    calibration_ref = document["calibration_ref"]
    if not isinstance(calibration_ref, str) or not calibration_ref:
        raise FormatError(f"{path}: calibration_ref must be a nonempty path string")
    records = load_calibration_file(path.parent / calibration_ref)
    unit_count = _get_int(ring_doc, "units", f"{path}: ring")
    by_id = {record.unit_id: record for record in records}
    calibrations = []
    for unit in range(unit_count):
        if unit not in by_id:
            raise FormatError(f"{path}: calibration file lacks unit {unit}")
        calibrations.append(by_id[unit].calibration)

    actuation_doc = document["actuation"]
    if not isinstance(actuation_doc, list) or not actuation_doc:
        raise FormatError(f"{path}: actuation must be a nonempty list")
    actuation = []
    for index, key in enumerate(actuation_doc):
        context = f"{path}: actuation[{index}]"
        _check_keys(key, context, {"t", "q"})
        actuation.append((_get_number(key, "t", context), _get_vec3(key, "q", context)))

    obstacles_doc = document["obstacles"]
    if not isinstance(obstacles_doc, list):
        raise FormatError(f"{path}: obstacles must be a list")
    obstacles = tuple(
        _parse_obstacle(entry, f"{path}: obstacles[{index}]")
        for index, entry in enumerate(obstacles_doc)
    )

    if not isinstance(run["seed"], int) or isinstance(run["seed"], bool) or run["seed"] < 0:
        raise FormatError(f"{path}: run seed must be a non-negative integer")
    mocap_noise = None
    if "mocap_noise" in run and run["mocap_noise"] is not None:
        mocap_noise = _get_number(run, "mocap_noise", f"{path}: run")

    try:
        geometry = SegmentGeometry(
            cable_radius=_get_number(robot, "r", f"{path}: robot"),
            cable_phase=_get_number(robot, "xi", f"{path}: robot")
            if "xi" in robot
            else TWO_THIRDS_PI,
            disk_count=_get_int(robot, "eta", f"{path}: robot"),
        )
        ring = RingLayout(
            sleeve_outer_diameter=_get_number(ring_doc, "D_o", f"{path}: ring"),
            unit_spacing=_get_number(ring_doc, "L_s", f"{path}: ring"),
            unit_count=unit_count,
            mount_disk_index=_get_int(robot, "mount_disk", f"{path}: robot"),
            first_unit_azimuth=_get_number(ring_doc, "first_azimuth", f"{path}: ring")
            if "first_azimuth" in ring_doc
            else 0.0,
        )
        noise = NoiseModel(
            kind=str(noise_doc["kind"]),
            sigma=_get_number(noise_doc, "sigma", f"{path}: noise"),
            ar_coefficient=_get_number(noise_doc, "ar_coefficient", f"{path}: noise")
            if "ar_coefficient" in noise_doc
            else 0.0,
            outlier_rate=_get_number(noise_doc, "outlier_rate", f"{path}: noise")
            if "outlier_rate" in noise_doc
            else 0.0,
            outlier_magnitude=_get_number(noise_doc, "outlier_magnitude", f"{path}: noise")
            if "outlier_magnitude" in noise_doc
            else 0.0,
        )
        return Scenario(
            name=path.stem,
            length=_get_number(robot, "L", f"{path}: robot"),
            geometry=geometry,
            ring=ring,
            calibrations=tuple(calibrations),
            noise=noise,
            obstacles=obstacles,
            actuation=tuple(actuation),
            duration_ms=_get_number(run, "duration", f"{path}: run"),
            rate_hz=_get_number(run, "rate", f"{path}: run"),
            seed=run["seed"],
            zones=ZoneThresholds(
                d_warn=_get_number(zones_doc, "d_warn", f"{path}: zones"),
                d_intrude=_get_number(zones_doc, "d_intrude", f"{path}: zones"),
            ),
            mocap_noise_mm=mocap_noise,
            history_horizon_ms=_get_number(run, "history_horizon", f"{path}: run")
            if "history_horizon" in run
            else 2000.0,
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def _obstacle_to_json(obstacle: Obstacle) -> dict:
    trajectory = [
        {"t": t, "position": list(position)} for t, position in obstacle.trajectory
    ]
    if isinstance(obstacle, PlaneObstacle):
        entry: dict = {"shape": "plane", "point": list(obstacle.point), "normal": list(obstacle.normal)}
    elif isinstance(obstacle, SphereObstacle):
        entry = {"shape": "sphere", "center": list(obstacle.center), "radius": obstacle.radius}
    else:
        entry = {
            "shape": "cylinder",
            "axis_point": list(obstacle.axis_point),
            "axis_direction": list(obstacle.axis_direction),
            "radius": obstacle.radius,
        }
    if trajectory:
        entry["trajectory"] = trajectory
    return entry


def save_scenario_file(path: str | Path, scenario: Scenario, calibration_ref: str) -> None:
    """Serialize a scenario next to its calibration file (path stored relative)."""
    document = {
        "format_version": SCENARIO_FORMAT_VERSION,
        "robot": {
            "L": scenario.length,
            "r": scenario.geometry.cable_radius,
            "xi": scenario.geometry.cable_phase,
            "eta": scenario.geometry.disk_count,
            "mount_disk": scenario.ring.mount_disk_index,
        },
        "ring": {
            "D_o": scenario.ring.sleeve_outer_diameter,
            "L_s": scenario.ring.unit_spacing,
            "units": scenario.ring.unit_count,
            "first_azimuth": scenario.ring.first_unit_azimuth,
        },
        "calibration_ref": calibration_ref,
        "noise": {
            "kind": scenario.noise.kind,
            "sigma": scenario.noise.sigma,
            "ar_coefficient": scenario.noise.ar_coefficient,
            "outlier_rate": scenario.noise.outlier_rate,
            "outlier_magnitude": scenario.noise.outlier_magnitude,
        },
        "obstacles": [_obstacle_to_json(ob) for ob in scenario.obstacles],
        "actuation": [{"t": t, "q": list(q)} for t, q in scenario.actuation],
        "run": {
            "duration": scenario.duration_ms,
            "rate": scenario.rate_hz,
            "seed": scenario.seed,
            "mocap_noise": scenario.mocap_noise_mm,
            "history_horizon": scenario.history_horizon_ms,
        },
        "zones": {
            "d_warn": scenario.zones.d_warn,
            "d_intrude": scenario.zones.d_intrude,
        },
    }
    atomic_write_text(path, json.dumps(document, indent=2) + "\n")


# --- trace and map exports --------------------------------------------------

_CHANNEL_COLUMNS = ("true_mm", "raw", "filt", "est_mm", "status", "zone",
                    "px", "py", "pz", "nx", "ny", "nz")
_MAP_CHANNEL_COLUMNS = ("filt", "est_mm", "status", "zone", "px", "py", "pz", "nx", "ny", "nz")


def _fmt(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return repr(value)


def _plane_cells(plane: Plane | None) -> list[str]:
    if plane is None:
        return [""] * 6
    return [_fmt(c) for c in (*plane.point, *plane.normal)]


def write_trace(path: str | Path, result: RunResult) -> None:
    """Columnar per-tick trace; wall-clock latency is deliberately left out so
    identical scenario + seed runs produce byte-identical files."""
    units = result.scenario.ring.unit_count
    columns = ["t_ms"]
    for unit in range(units):
        columns.extend(f"{name}{unit}" for name in _CHANNEL_COLUMNS)
    lines = [
        f"# circumsense-trace {TRACE_FORMAT_VERSION}",
        f"# scenario={result.scenario.name}",
        f"# channels={units}",
        f"# observed_arc_deg={observed_arc_deg(result.scenario.ring)!r}",
        "# azimuths outside the observed arc are unobserved; no claim is made there",
        "# columns=" + ",".join(columns),
    ]
    for record in result.ticks:
        cells = [_fmt(record.t_ms)]
        for unit in range(units):
            cells.append(_fmt(record.true_mm[unit]))
            cells.append(_fmt(record.raw_counts[unit]))
            cells.append(_fmt(record.filtered_counts[unit]))
            cells.append(_fmt(record.est_mm[unit]))
            cells.append(record.status[unit].value)
            cells.append(record.zone[unit].value)
            cells.extend(_plane_cells(record.planes[unit]))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass(frozen=True)
class TraceChannel:
    true_mm: float | None
    raw: int | None
    filt: float
    est_mm: float
    status: GapStatus
    zone: Zone
    plane: Plane | None


@dataclass(frozen=True)
class TraceRow:
    t_ms: float
    channels: tuple[TraceChannel, ...]


def _parse_optional_float(cell: str) -> float | None:
    return None if cell == "" else float(cell)


def read_trace(path: str | Path) -> tuple[dict[str, str], list[TraceRow]]:
    """Parse a trace written by write_trace into header metadata and rows."""
    header: dict[str, str] = {}
    rows: list[TraceRow] = []
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# circumsense-trace"):
        raise FormatError(f"{path}: not a circumsense trace file")
    data_lines = []
    for line in lines:
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                header[key.strip()] = value.strip()
        elif line.strip():
            data_lines.append(line)
    try:
        units = int(header["channels"])
    except (KeyError, ValueError):
        raise FormatError(f"{path}: missing or invalid channels header") from None
    width = 1 + units * len(_CHANNEL_COLUMNS)
    for number, line in enumerate(data_lines, start=1):
        cells = line.split(",")
        if len(cells) != width:
            raise FormatError(f"{path}: row {number} has {len(cells)} cells, expected {width}")
        try:
            t_ms = float(cells[0])
            channels = []
            for unit in range(units):
                base = 1 + unit * len(_CHANNEL_COLUMNS)
                plane_cells = cells[base + 6 : base + 12]
                if any(cell != "" for cell in plane_cells):
                    plane = Plane(
                        tuple(float(c) for c in plane_cells[:3]),
                        tuple(float(c) for c in plane_cells[3:]),
                    )
                else:
                    plane = None
                channels.append(
                    TraceChannel(
                        true_mm=_parse_optional_float(cells[base]),
                        raw=int(cells[base + 1]) if cells[base + 1] else None,
                        filt=float(cells[base + 2]),
                        est_mm=float(cells[base + 3]),
                        status=GapStatus(cells[base + 4]),
                        zone=Zone(cells[base + 5]),
                        plane=plane,
                    )
                )
        except ValueError as exc:
            raise FormatError(f"{path}: row {number}: {exc}") from exc
        rows.append(TraceRow(t_ms, tuple(channels)))
    return header, rows


@dataclass(frozen=True)
class MapTick:
    """One replayed tick: per-channel filtered value, gap, zone, and plane."""

    t_ms: float
    filtered: dict[int, FilteredSample]
    gaps: dict[int, "object"]
    zones: dict[int, Zone]
    planes: dict[int, Plane | None]


def write_map_export(
    path: str | Path,
    ring: RingLayout,
    ticks: Sequence[MapTick],
) -> None:
    units = ring.unit_count
    columns = ["t_ms"]
    for unit in range(units):
        columns.extend(f"{name}{unit}" for name in _MAP_CHANNEL_COLUMNS)
    lines = [
        f"# circumsense-map {TRACE_FORMAT_VERSION}",
        f"# channels={units}",
        f"# observed_arc_deg={observed_arc_deg(ring)!r}",
        "# azimuths outside the observed arc are unobserved; no claim is made there",
        "# columns=" + ",".join(columns),
    ]
    for tick in ticks:
        cells = [_fmt(tick.t_ms)]
        for unit in range(units):
            sample = tick.filtered.get(unit)
            gap = tick.gaps.get(unit)
            cells.append(_fmt(sample.value) if sample is not None else "")
            cells.append(_fmt(gap.distance) if gap is not None else "")
            cells.append(gap.status.value if gap is not None else "")
            zone = tick.zones.get(unit)
            cells.append(zone.value if zone is not None else "")
            cells.extend(_plane_cells(tick.planes.get(unit)))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def frames_from_run(result: RunResult) -> list[StreamFrame]:
    """Raw frames of a simulated run, one per channel per tick."""
    frames = []
    for record in result.ticks:
        for unit, counts in enumerate(record.raw_counts):
            frames.append(
                StreamFrame(
                    timestamp=int(round(record.t_ms)),
                    channel=unit,
                    value=counts,
                    flag="raw",
                )
            )
    return frames


def render_metrics_report(result: RunResult) -> str:
    """Human-readable, grep-friendly run summary."""
    metrics = result.metrics
    units = result.scenario.ring.unit_count
    lines = [
        f"circumsense-report {TRACE_FORMAT_VERSION}",
        f"scenario {result.scenario.name}",
        f"seed {result.scenario.seed}",
        f"ticks {len(result.ticks)}",
        f"channels {units}",
    ]
    for unit in range(units):
        rmse = metrics.per_channel_rmse[unit]
        max_err = metrics.per_channel_max_abs_error[unit]
        lines.append(
            f"channel {unit} in_range_ticks={metrics.in_range_ticks[unit]} "
            f"rmse_mm={'none' if rmse is None else format(rmse, '.6g')} "
            f"max_abs_err_mm={'none' if max_err is None else format(max_err, '.6g')}"
        )
    lines.append(
        f"latency_ms median={metrics.latency_median_ms:.4g} "
        f"p95={metrics.latency_p95_ms:.4g} max={metrics.latency_max_ms:.4g}"
    )
    lines.append(f"zone_transitions {len(metrics.zone_transitions)}")
    for transition in metrics.zone_transitions:
        lines.append(
            f"zone_transition t={transition.timestamp!r} ch={transition.channel} "
            f"{transition.previous.value}->{transition.current.value}"
        )
    return "\n".join(lines) + "\n"


def write_metrics_report(path: str | Path, result: RunResult) -> None:
    atomic_write_text(path, render_metrics_report(result))
