"""Command-line entry points: calibrate, simulate, replay, report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .filtering import ChannelFilter, RawSample
from .formats import (
    CalibrationRecord,
    FormatError,
    MapTick,
    frames_from_run,
    load_scenario,
    parse_calibration_csv,
    read_frames,
    read_trace,
    save_calibration_file,
    write_frames,
    write_map_export,
    write_metrics_report,
    write_trace,
    atomic_write_text,
)
from .mapping import GapStatus, empty_map, reading_to_gap, update_map
from .optical import CalibrationError, counts_to_volts, fit_calibration
from .sim import run_scenario, sensor_poses_at


def _cmd_calibrate(args: argparse.Namespace) -> int:
    per_unit = parse_calibration_csv(args.csv_in)
    records = []
    for unit, samples in enumerate(per_unit):
        floor = None
        if args.sensitivity_floor is not None:
            floor = args.sensitivity_floor
        report = fit_calibration(
            samples, sensitivity_floor=floor, max_distance=args.max_distance
        )
        records.append(CalibrationRecord(unit, report.calibration, report.r_squared))
        print(
            f"unit {unit}: r_squared={report.r_squared:.6f} "
            f"residual_rms={report.residual_rms:.4g} V iterations={report.iterations}"
        )
    save_calibration_file(args.params_out, records)
    print(f"wrote {args.params_out}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario_in)
    result = run_scenario(scenario)
    write_trace(args.trace_out, result)
    write_metrics_report(args.report_out, result)
    if args.frames_out is not None:
        write_frames(args.frames_out, frames_from_run(result))
    metrics = result.metrics
    print(
        f"simulated {len(result.ticks)} ticks of '{scenario.name}'; "
        f"latency median {metrics.latency_median_ms:.3g} ms, "
        f"max {metrics.latency_max_ms:.3g} ms"
    )
    for unit, rmse in enumerate(metrics.per_channel_rmse):
        shown = "none" if rmse is None else f"{rmse:.4g} mm"
        print(f"  channel {unit}: rmse {shown} over {metrics.in_range_ticks[unit]} in-range ticks")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario_in)
    frames = read_frames(args.frames_in)
    if not frames:
        raise FormatError(f"{args.frames_in}: no frames")
    units = scenario.ring.unit_count
    for frame in frames:
        if frame.flag != "raw":
            raise FormatError(
                f"{args.frames_in}: replay expects raw frames, got a {frame.flag!r} frame "
                f"at t={frame.timestamp}"
            )
        if frame.channel >= units:
            raise FormatError(
                f"{args.frames_in}: frame references unknown channel {frame.channel} "
                f"(scenario has {units} units)"
            )

    by_tick: dict[int, dict[int, float]] = {}
    for frame in frames:
        slot = by_tick.setdefault(frame.timestamp, {})
        if frame.channel in slot:
            raise FormatError(
                f"{args.frames_in}: duplicate reading for channel {frame.channel} "
                f"at t={frame.timestamp}"
            )
        slot[frame.channel] = float(frame.value)

    filters = [ChannelFilter() for _ in range(units)]
    obstacle_map = empty_map()
    ticks: list[MapTick] = []
    for t in sorted(by_tick):
        poses_all = sensor_poses_at(scenario, float(t))
        filtered = {}
        gaps = {}
        poses = []
        gap_list = []
        for channel in sorted(by_tick[t]):
            sample = filters[channel].push_sample(RawSample(float(t), channel, by_tick[t][channel]))
            filtered[channel] = sample
            gap = reading_to_gap(
                counts_to_volts(sample.value),
                scenario.calibrations[channel],
                channel=channel,
                timestamp=float(t),
            )
            gaps[channel] = gap
            gap_list.append(gap)
            poses.append(poses_all[channel])
        obstacle_map = update_map(
            gap_list, poses, scenario.zones, obstacle_map, scenario.history_horizon_ms
        )
        ticks.append(
            MapTick(
                t_ms=float(t),
                filtered=filtered,
                gaps=gaps,
                zones=dict(obstacle_map.zones),
                planes={u: obstacle_map.planes.get(u) for u in range(units)},
            )
        )
    write_map_export(args.map_out, scenario.ring, ticks)
    print(f"replayed {len(ticks)} ticks into {args.map_out}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    header, rows = read_trace(args.trace_in)
    units = int(header["channels"])
    print("channel,in_range_ticks,rmse_mm,max_abs_err_mm")
    error_lines = ["t_ms,channel,true_mm,est_mm,abs_err_mm"]
    for unit in range(units):
        errors = []
        for row in rows:
            channel = row.channels[unit]
            if channel.status is GapStatus.IN_RANGE and channel.true_mm is not None:
                err = channel.est_mm - channel.true_mm
                errors.append(err)
                error_lines.append(
                    f"{row.t_ms!r},{unit},{channel.true_mm!r},{channel.est_mm!r},{abs(err)!r}"
                )
        if errors:
            rmse = (sum(e * e for e in errors) / len(errors)) ** 0.5
            worst = max(abs(e) for e in errors)
            print(f"{unit},{len(errors)},{rmse:.6g},{worst:.6g}")
        else:
            print(f"{unit},0,none,none")
    if args.errors_out is not None:
        atomic_write_text(args.errors_out, "\n".join(error_lines) + "\n")
        print(f"wrote per-tick errors to {args.errors_out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="circumsense",
        description="Circumferential proximity sensing toolkit: calibrate units, "
        "simulate scenarios, replay recorded frames, and summarize traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    calibrate = sub.add_parser("calibrate", help="fit per-unit logistic calibrations from a CSV")
    calibrate.add_argument("csv_in", type=Path)
    calibrate.add_argument("params_out", type=Path)
    calibrate.add_argument(
        "--sensitivity-floor",
        type=float,
        default=None,
        help="slope floor [V/mm] bounding the invertible band (default: 2%% of peak)",
    )
    calibrate.add_argument(
        "--max-distance",
        type=float,
        default=None,
        help="reporting ceiling [mm] (default: the largest calibrated distance)",
    )
    calibrate.set_defaults(func=_cmd_calibrate)

    simulate = sub.add_parser("simulate", help="run a scenario and write trace + report")
    simulate.add_argument("scenario_in", type=Path)
    simulate.add_argument("trace_out", type=Path)
    simulate.add_argument("report_out", type=Path)
    simulate.add_argument(
        "--frames-out", type=Path, default=None, help="also write the raw frame stream"
    )
    simulate.set_defaults(func=_cmd_simulate)

    replay = sub.add_parser("replay", help="feed recorded raw frames through filtering + mapping")
    replay.add_argument("frames_in", type=Path)
    replay.add_argument("scenario_in", type=Path)
    replay.add_argument("map_out", type=Path)
    replay.set_defaults(func=_cmd_replay)

    report = sub.add_parser("report", help="summarize a trace as plot-ready columns")
    report.add_argument("trace_in", type=Path)
    report.add_argument(
        "--errors-out", type=Path, default=None, help="write per-tick error rows to a file"
    )
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, CalibrationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
