"""Throughput measurement, power-state modeling, efficiency, and battery life.

Power is modeled, not measured: a PowerTable carries per-state board wattage
read from config, and efficiency is throughput per Watt. IPS uses a plain
trailing window (default 1 s) rather than smoothing.
"""

from __future__ import annotations

import threading
from bisect import bisect_right
from dataclasses import dataclass
from statistics import fmean
from typing import Optional, Sequence

from .errors import InvalidParamsError

POWER_MODES = ("five_watt", "maxn")

# Throughput at or above this is considered real-time (faster than the
# ~190 ms human visual response, with margin).
REALTIME_IPS = 10.0


@dataclass(frozen=True)
class PowerTable:
    """Average board power per model state, in Watts.

    States normally satisfy idle_no_model <= idle_model_loaded <=
    inferencing; a table that violates the ordering is rejected unless
    allow_unordered is set (some boards do idle hotter than they infer).
    """

    idle_no_model: float
    idle_model_loaded: float
    inferencing: float
    allow_unordered: bool = False

    def __post_init__(self):
        for state in ("idle_no_model", "idle_model_loaded", "inferencing"):
            watts = getattr(self, state)
            if watts <= 0:
                raise InvalidParamsError(f"{state} must be > 0 W, got {watts}")
        if not self.allow_unordered and not (
            self.idle_no_model <= self.idle_model_loaded <= self.inferencing
        ):
            raise InvalidParamsError(
                "power states out of order (expected idle_no_model <= "
                "idle_model_loaded <= inferencing); set allow_unordered to keep"
            )

    def watts_for(self, state: str) -> float:
        try:
            return getattr(self, state)
        except AttributeError:
            raise InvalidParamsError(f"unknown power state: {state!r}") from None


@dataclass(frozen=True)
class PowerProfile:
    """A board power mode bound to its measured per-state table."""

    mode: str
    table: PowerTable

    def __post_init__(self):
        if self.mode not in POWER_MODES:
            raise InvalidParamsError(
                f"power mode must be one of {POWER_MODES}, got {self.mode!r}"
            )


@dataclass(frozen=True)
class TelemetrySample:
    """A consistent snapshot of the trailing measurement window."""

    window_start: float
    window_end: float
    inference_count: int
    ips: float
    mean_inference_s: float
    mean_capture_s: float
    power_state: str
    watts: float
    efficiency: float

    def to_dict(self) -> dict:
        return {
            "window_start_s": self.window_start,
            "window_end_s": self.window_end,
            "inference_count": self.inference_count,
            "ips": self.ips,
            "mean_inference_s": self.mean_inference_s,
            "mean_capture_s": self.mean_capture_s,
            "power_state": self.power_state,
            "watts": self.watts,
            "efficiency": self.efficiency,
        }


def measure_ips(
    completions: Sequence[float], window_s: float, now: Optional[float] = None
) -> float:
    """Completions inside the trailing window divided by the window length.

    completions are monotone non-decreasing timestamps in seconds. The
    window ends at `now` (default: the newest completion) and an event
    counts when window_end - window < t <= window_end. No completions is
    simply 0 IPS, not an error.
    """
    if window_s <= 0:
        raise InvalidParamsError(f"window must be > 0 s, got {window_s}")
    times = list(completions)
    if not times:
        return 0.0
    end = times[-1] if now is None else now
    count = bisect_right(times, end) - bisect_right(times, end - window_s)
    return count / window_s


def efficiency(ips: float, watts: float) -> float:
    """Throughput per unit power, in inferences per second per Watt."""
    if watts <= 0:
        raise InvalidParamsError(f"watts must be > 0, got {watts}")
    return ips / watts


def battery_life(capacity_wh: float, avg_power_w: float) -> float:
    """Hours a battery of the given capacity sustains the average draw."""
    if avg_power_w <= 0:
        raise InvalidParamsError(f"average power must be > 0 W, got {avg_power_w}")
    if capacity_wh < 0:
        raise InvalidParamsError(f"capacity must be >= 0 Wh, got {capacity_wh}")
    return capacity_wh / avg_power_w


class TelemetryCollector:
    """Accumulates per-inference timing plus the active power state.

    Thread-safe: pipeline stages may record concurrently and sample() takes
    its snapshot under the same lock, so readers never observe a
    half-updated window. mean_capture_s is a running mean over all captures
    (captures are not individually timestamped).
    """

    def __init__(self, window_s: float = 1.0):
        if window_s <= 0:
            raise InvalidParamsError(f"window must be > 0 s, got {window_s}")
        self.window_s = window_s
        self._lock = threading.Lock()
        self._completions: list[float] = []
        self._durations: list[float] = []
        self._capture_durations: list[float] = []
        self._power_state = "unspecified"
        self._watts = 0.0

    def record_inference(self, completed_at_s: float, duration_s: float) -> None:
        with self._lock:
            if self._completions and completed_at_s < self._completions[-1]:
                raise InvalidParamsError("completion timestamps must not decrease")
            self._completions.append(completed_at_s)
            self._durations.append(duration_s)

    def record_capture(self, duration_s: float) -> None:
        with self._lock:
            self._capture_durations.append(duration_s)

    def set_power_state(self, state: str, watts: float) -> None:
        with self._lock:
            self._power_state = state
            self._watts = watts

    @property
    def inference_durations(self) -> tuple[float, ...]:
        with self._lock:
            return tuple(self._durations)

    def sample(self, now_s: float) -> TelemetrySample:
        """Snapshot the trailing window ending at now_s."""
        with self._lock:
            start = now_s - self.window_s
            lo = bisect_right(self._completions, start)
            hi = bisect_right(self._completions, now_s)
            in_window = self._durations[lo:hi]
            ips = len(in_window) / self.window_s
            eff = ips / self._watts if self._watts > 0 else 0.0
            return TelemetrySample(
                window_start=start,
                window_end=now_s,
                inference_count=len(in_window),
                ips=ips,
                mean_inference_s=fmean(in_window) if in_window else 0.0,
                mean_capture_s=(
                    fmean(self._capture_durations) if self._capture_durations else 0.0
                ),
                power_state=self._power_state,
                watts=self._watts,
                efficiency=eff,
            )
