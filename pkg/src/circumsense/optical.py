"""Logistic response model of one optoelectronic proximity unit.

Covers the forward voltage model, its closed-form inversion to distance,
nonlinear least-squares calibration from distance-voltage samples, and the
ADC count/volt conversion used at the acquisition boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# 10-bit ADC against a 5.0 V reference; counts -> volts happens exactly once,
# at ingestion, so all internal math runs in volts and millimetres.
ADC_MAX = 1023
ADC_VREF = 5.0

# Default sensitivity floor for deriving the invertible voltage band, as a
# fraction of the peak curve slope |k|*v_max/4.
DEFAULT_SENSITIVITY_FLOOR_FRACTION = 0.02

_MAX_ITERATIONS = 200
_STEP_TOL = 1e-10
_DAMPING_INIT = 1e-3
_DAMPING_INCREASE = 7.0
_DAMPING_DECREASE = 0.4
_DAMPING_MIN = 1e-12
_DAMPING_MAX = 1e12


class CalibrationError(Exception):
    """Calibration input is unusable (too few points, degenerate data)."""


class FitConvergenceError(CalibrationError):
    """The least-squares fit did not converge within the iteration cap."""

    def __init__(self, message: str, iterations: int, params: tuple[float, ...], cost: float):
        super().__init__(f"{message} (iterations={iterations}, params={params}, sse={cost:.6g})")
        self.iterations = iterations
        self.params = params
        self.cost = cost


class VoltageOutOfRange(Exception):
    """Voltage falls outside the calibrated invertible band; caller should clamp."""

    def __init__(self, voltage: float, low: float, up: float):
        super().__init__(f"voltage {voltage:.6g} V outside invertible band ({low:.6g}, {up:.6g})")
        self.voltage = voltage
        self.low = low
        self.up = up


class VoltageDomainError(ValueError):
    """Voltage cannot come from the logistic at any distance."""


def counts_to_volts(counts: float) -> float:
    return counts * (ADC_VREF / ADC_MAX)


def volts_to_counts(volts: float) -> float:
    return volts * (ADC_MAX / ADC_VREF)


def quantize_counts(counts: float) -> int:
    """Round-to-nearest onto the ADC grid, clipped to [0, ADC_MAX]."""
    quantized = math.floor(counts + 0.5)
    return min(max(quantized, 0), ADC_MAX)


@dataclass(frozen=True)
class SensorCalibration:
    """Fitted logistic parameters plus the validity band of one sensing unit.

    v_max: saturation voltage swing [V].
    k_slope: sensitivity coefficient [1/mm]; negative when voltage rises as
        the target gets closer.
    delta_z0: critical distance at the curve midpoint [mm].
    epsilon: baseline voltage offset [V].
    threshold_low / threshold_up: voltage band within which inversion is
        well-conditioned.
    max_distance: reporting ceiling for gap estimates [mm].
    """

    v_max: float
    k_slope: float
    delta_z0: float
    epsilon: float
    threshold_low: float
    threshold_up: float
    max_distance: float

    def __post_init__(self) -> None:
        if not self.v_max > 0.0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")
        if self.k_slope == 0.0:
            raise ValueError("k_slope must be nonzero")
        if not self.max_distance > 0.0:
            raise ValueError(f"max_distance must be positive, got {self.max_distance}")
        if not self.threshold_low < self.threshold_up:
            raise ValueError("threshold_low must be below threshold_up")
        # Thresholds must sit strictly inside the open voltage range of the
        # logistic so the restriction to the band is strictly monotonic.
        if not (self.epsilon < self.threshold_low and self.threshold_up < self.v_max + self.epsilon):
            raise ValueError("thresholds must lie inside (epsilon, v_max + epsilon)")


@dataclass(frozen=True)
class CalibrationSample:
    """One calibration observation: target distance [mm] and unit output [V]."""

    distance: float
    voltage: float

    def __post_init__(self) -> None:
        if self.distance < 0.0:
            raise ValueError(f"distance must be >= 0, got {self.distance}")
        if self.voltage < 0.0:
            raise ValueError(f"voltage must be >= 0, got {self.voltage}")


@dataclass(frozen=True)
class FitReport:
    calibration: SensorCalibration
    r_squared: float
    residual_rms: float
    iterations: int

    def __post_init__(self) -> None:
        if self.r_squared > 1.0:
            raise ValueError("r_squared cannot exceed 1")


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _sigmoid_array(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def response_voltage(delta_z: float, calib: SensorCalibration) -> float:
    """Model voltage at gap distance `delta_z` [mm]."""
    if delta_z < 0.0:
        raise ValueError(f"distance must be >= 0, got {delta_z}")
    return calib.v_max * _sigmoid(calib.k_slope * (delta_z - calib.delta_z0)) + calib.epsilon


def far_field_voltage(calib: SensorCalibration) -> float:
    """Asymptotic voltage with no target in range."""
    return calib.epsilon + (calib.v_max if calib.k_slope > 0.0 else 0.0)


def invert_voltage(voltage: float, calib: SensorCalibration) -> float:
    """Distance whose model voltage equals `voltage`, valid inside the band.

    Raises VoltageOutOfRange outside (threshold_low, threshold_up), and
    VoltageDomainError for voltages no distance can produce.
    """
    if not calib.threshold_low < voltage < calib.threshold_up:
        raise VoltageOutOfRange(voltage, calib.threshold_low, calib.threshold_up)
    headroom = voltage - calib.epsilon
    if headroom <= 0.0 or headroom >= calib.v_max:
        raise VoltageDomainError(
            f"voltage {voltage:.6g} V is outside the open range of the logistic"
        )
    return calib.delta_z0 - math.log(calib.v_max / headroom - 1.0) / calib.k_slope


def logistic_thresholds(
    v_max: float, k_slope: float, epsilon: float, sensitivity_floor: float
) -> tuple[float, float]:
    """Voltages where the curve slope magnitude falls to `sensitivity_floor` [V/mm].

    The slope peaks at |k|*v_max/4 at the midpoint; the two solutions sit
    symmetrically about v_max/2 + epsilon. A floor at the peak collapses the
    band to that midpoint; a floor above it has no solution.
    """
    if not sensitivity_floor > 0.0:
        raise ValueError("sensitivity_floor must be positive")
    peak = abs(k_slope) * v_max / 4.0
    if sensitivity_floor > peak * (1.0 + 1e-12):
        raise ValueError(
            f"sensitivity floor {sensitivity_floor:.6g} exceeds peak slope {peak:.6g}"
        )
    level = sensitivity_floor / (abs(k_slope) * v_max)
    disc = math.sqrt(max(1.0 - 4.0 * level, 0.0))
    low = epsilon + v_max * (1.0 - disc) / 2.0
    up = epsilon + v_max * (1.0 + disc) / 2.0
    return low, up


def derive_thresholds(calib: SensorCalibration, sensitivity_floor: float) -> tuple[float, float]:
    """Invertible voltage band of an existing calibration at a given slope floor."""
    return logistic_thresholds(calib.v_max, calib.k_slope, calib.epsilon, sensitivity_floor)


def _model(distances: np.ndarray, params: np.ndarray) -> np.ndarray:
    v_max, k, d0, eps = params
    return v_max * _sigmoid_array(k * (distances - d0)) + eps


def _jacobian(distances: np.ndarray, params: np.ndarray) -> np.ndarray:
    v_max, k, d0, _ = params
    s = _sigmoid_array(k * (distances - d0))
    bell = s * (1.0 - s)
    jac = np.empty((distances.size, 4))
    jac[:, 0] = s
    jac[:, 1] = v_max * bell * (distances - d0)
    jac[:, 2] = -v_max * bell * k
    jac[:, 3] = 1.0
    return jac


def _initial_guess(distances: np.ndarray, voltages: np.ndarray) -> np.ndarray:
    v_max0 = float(np.ptp(voltages))
    eps0 = float(voltages.min())
    mid = eps0 + v_max0 / 2.0
    d00 = float(distances[np.argmin(np.abs(voltages - mid))])
    order = np.argsort(distances, kind="stable")
    dd = np.diff(distances[order])
    dv = np.diff(voltages[order])
    usable = dd > 1e-12
    if usable.any():
        peak = float(np.max(np.abs(dv[usable] / dd[usable])))
    else:
        peak = v_max0 / max(float(np.ptp(distances)), 1e-12)
    trend = float(np.polyfit(distances, voltages, 1)[0])
    sign = -1.0 if trend < 0.0 else 1.0
    k0 = sign * 4.0 * peak / v_max0
    return np.array([v_max0, k0, d00, eps0])


def fit_calibration(
    samples: Sequence[CalibrationSample],
    init: tuple[float, float, float, float] | None = None,
    *,
    sensitivity_floor: float | None = None,
    max_distance: float | None = None,
) -> FitReport:
    """Fit the four-parameter logistic to distance-voltage samples.

    Damped Gauss-Newton with an analytic Jacobian; deterministic for a given
    input and initial guess. The returned calibration carries an invertible
    voltage band derived at `sensitivity_floor` (default: 2% of the fitted
    peak slope) and a reporting ceiling `max_distance` (default: the largest
    calibrated distance).
    """
    if len(samples) < 8:
        raise CalibrationError(f"need at least 8 samples, got {len(samples)}")
    distances = np.array([s.distance for s in samples], dtype=float)
    voltages = np.array([s.voltage for s in samples], dtype=float)
    if float(np.ptp(voltages)) <= 0.0:
        raise CalibrationError("degenerate data: voltage has no spread")
    if float(np.ptp(distances)) <= 0.0:
        raise CalibrationError("degenerate data: all samples at the same distance")

    params = np.array(init, dtype=float) if init is not None else _initial_guess(distances, voltages)
    if params.shape != (4,):
        raise ValueError("init must supply (v_max, k_slope, delta_z0, epsilon)")

    def sse(p: np.ndarray) -> float:
        r = _model(distances, p) - voltages
        return float(r @ r)

    damping = _DAMPING_INIT
    cost = sse(params)
    iterations = 0
    converged = False
    while iterations < _MAX_ITERATIONS and not converged:
        iterations += 1
        residual = _model(distances, params) - voltages
        jac = _jacobian(distances, params)
        grad = jac.T @ residual
        hess = jac.T @ jac
        diag = np.diag(np.maximum(np.diag(hess), 1e-12))
        while True:
            try:
                step = np.linalg.solve(hess + damping * diag, -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is not None:
                candidate = params + step
                new_cost = sse(candidate)
                if new_cost <= cost:
                    scale = float(np.linalg.norm(candidate))
                    converged = float(np.linalg.norm(step)) <= _STEP_TOL * (_STEP_TOL + scale)
                    params, cost = candidate, new_cost
                    damping = max(damping * _DAMPING_DECREASE, _DAMPING_MIN)
                    break
            damping *= _DAMPING_INCREASE
            if damping > _DAMPING_MAX:
                raise FitConvergenceError(
                    "damping exhausted without cost reduction",
                    iterations,
                    tuple(params),
                    cost,
                )
    if not converged:
        raise FitConvergenceError(
            "iteration cap reached before convergence", iterations, tuple(params), cost
        )

    v_max, k_slope, delta_z0, epsilon = (float(p) for p in params)
    if v_max <= 0.0 or k_slope == 0.0:
        raise FitConvergenceError(
            "fit converged to a non-physical curve", iterations, tuple(params), cost
        )
    residual = _model(distances, params) - voltages
    ss_res = float(residual @ residual)
    ss_tot = float(np.sum((voltages - voltages.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot
    residual_rms = math.sqrt(ss_res / voltages.size)

    if sensitivity_floor is None:
        sensitivity_floor = DEFAULT_SENSITIVITY_FLOOR_FRACTION * abs(k_slope) * v_max / 4.0
    low, up = logistic_thresholds(v_max, k_slope, epsilon, sensitivity_floor)
    if max_distance is None:
        max_distance = float(distances.max())
    calibration = SensorCalibration(
        v_max=v_max,
        k_slope=k_slope,
        delta_z0=delta_z0,
        epsilon=epsilon,
        threshold_low=low,
        threshold_up=up,
        max_distance=max_distance,
    )
    return FitReport(calibration, r_squared, residual_rms, iterations)
