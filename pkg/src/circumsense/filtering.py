"""Streaming per-channel preprocessing at the 100 Hz acquisition rate.

Each channel runs a quartile-fenced outlier gate in front of a moving
average: samples outside the Tukey fences of the current window are dropped
before they can contaminate the smoothed output, and the previous smoothed
value is repeated so the output cadence stays uniform.
"""

from __future__ import annotations

import math
from bisect import insort
from collections import deque
from dataclasses import dataclass

import numpy as np

DEFAULT_WINDOW_SIZE = 10
DEFAULT_IQR_FACTOR = 1.5

# The fence needs a few admitted samples before quartiles mean anything;
# below this count every sample is admitted.
MIN_GATE_WINDOW = 4


@dataclass(frozen=True)
class RawSample:
    """One raw reading: timestamp [ms], unit channel, value [ADC counts]."""

    timestamp: float
    channel: int
    value: float

    def __post_init__(self) -> None:
        if self.channel < 0:
            raise ValueError(f"channel must be >= 0, got {self.channel}")


@dataclass(frozen=True)
class FilteredSample:
    """Smoothed reading; `rejected` marks the contributing raw sample as an outlier."""

    timestamp: float
    channel: int
    value: float
    rejected: bool


def _quantile_sorted(values: list[float], fraction: float) -> float:
    # Linear interpolation between order statistics (inclusive method).
    pos = (len(values) - 1) * fraction
    lo = int(pos)
    frac = pos - lo
    if frac == 0.0:
        return values[lo]
    return values[lo] + frac * (values[lo + 1] - values[lo])


class ChannelFilter:
    """Single-channel outlier gate plus moving average.

    The Tukey fences [Q1 - f*IQR, Q3 + f*IQR] are computed over the last
    `window_size` raw samples, so the gate keeps tracking the signal even
    while it rejects; gating against admitted samples only can freeze the
    fences on coarsely quantized data and then reject forever. Admitted
    samples feed a separate window of the last `window_size` accepted values
    whose mean is the output; rejected samples repeat the previous output
    with the rejected flag set, keeping the output cadence uniform.

    Single-writer: one instance per channel, never shared across channels.
    """

    def __init__(
        self,
        window_size: int = DEFAULT_WINDOW_SIZE,
        iqr_factor: float = DEFAULT_IQR_FACTOR,
    ):
        if window_size < 1:
            raise ValueError(f"window_size must be >= 1, got {window_size}")
        if iqr_factor < 0.0:
            raise ValueError(f"iqr_factor must be >= 0, got {iqr_factor}")
        self.window_size = window_size
        self.iqr_factor = iqr_factor
        self._window: deque[float] = deque()
        self._history: deque[float] = deque()
        self._history_sorted: list[float] = []
        self._channel: int | None = None
        self._last_timestamp: float | None = None
        self._last_output: float | None = None

    def push_sample(self, sample: RawSample) -> FilteredSample:
        if self._channel is None:
            self._channel = sample.channel
        elif sample.channel != self._channel:
            raise ValueError(
                f"filter bound to channel {self._channel}, got sample for {sample.channel}"
            )
        if self._last_timestamp is not None and sample.timestamp < self._last_timestamp:
            raise ValueError(
                f"timestamps must be non-decreasing per channel "
                f"({sample.timestamp} after {self._last_timestamp})"
            )
        self._last_timestamp = sample.timestamp

        if len(self._history) >= MIN_GATE_WINDOW:
            q1 = _quantile_sorted(self._history_sorted, 0.25)
            q3 = _quantile_sorted(self._history_sorted, 0.75)
            spread = self.iqr_factor * (q3 - q1)
            admitted = (q1 - spread) <= sample.value <= (q3 + spread)
        else:
            admitted = True

        if len(self._history) == self.window_size:
            self._history_sorted.remove(self._history.popleft())
        self._history.append(sample.value)
        insort(self._history_sorted, sample.value)

        if admitted:
            if len(self._window) == self.window_size:
                self._window.popleft()
            self._window.append(sample.value)
            self._last_output = math.fsum(self._window) / len(self._window)
        # A rejection always has a previous output: the gate only arms after
        # MIN_GATE_WINDOW samples.
        assert self._last_output is not None
        return FilteredSample(sample.timestamp, sample.channel, self._last_output, not admitted)

    @property
    def window(self) -> tuple[float, ...]:
        """Admitted samples currently feeding the moving average."""
        return tuple(self._window)


def variance(values) -> float:
    """Unbiased sample variance; needs at least two values."""
    data = np.asarray(values, dtype=float)
    if data.size < 2:
        raise ValueError(f"variance needs >= 2 values, got {data.size}")
    return float(np.var(data, ddof=1))


def sqi(values) -> float:
    """Signal quality index in [0, 1]: 1 - sd(detrended)/(|mean| + sd(detrended)).

    The window is detrended with a least-squares line so slow drifts do not
    count as noise; a constant window scores 1, as does the degenerate
    all-zero window.
    """
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise ValueError("sqi needs a nonempty window")
    if data.size >= 2:
        idx = np.arange(data.size, dtype=float)
        slope, intercept = np.polyfit(idx, data, 1)
        residual = data - (slope * idx + intercept)
    else:
        residual = np.zeros(1)
    spread = float(np.std(residual))
    magnitude = abs(float(data.mean()))
    if spread == 0.0:
        return 1.0
    return 1.0 - spread / (magnitude + spread)


def sqi_improvement(raw, filtered) -> float:
    """Relative quality gain of the filtered window over the raw one."""
    raw_data = np.asarray(raw, dtype=float)
    filtered_data = np.asarray(filtered, dtype=float)
    if raw_data.size == 0 or raw_data.size != filtered_data.size:
        raise ValueError("windows must be nonempty and the same length")
    base = sqi(raw_data)
    improved = sqi(filtered_data)
    if base == 0.0:
        return math.inf if improved > 0.0 else 0.0
    return improved / base - 1.0
