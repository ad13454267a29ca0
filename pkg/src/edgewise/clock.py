"""Monotonic and simulated clocks.

Every duration in a run is consumed through a clock, so tests and benches
can swap wall time for a deterministic virtual timeline: sleep() on the
simulated clock advances instantly, and a whole run replays in microseconds
with bit-identical timestamps.
"""

from __future__ import annotations

import time

from .errors import InvalidParamsError


class MonotonicClock:
    """Wall time via the OS monotonic counter."""

    simulated = False

    def now_ns(self) -> int:
        return time.monotonic_ns()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)

    def advance(self, seconds: float) -> None:
        # Real time passes on its own; nothing to do.
        pass


class SimulatedClock:
    """Deterministic virtual clock; sleep() and advance() both jump forward."""

    simulated = True

    def __init__(self, start_ns: int = 0):
        self._now_ns = start_ns

    def now_ns(self) -> int:
        return self._now_ns

    def sleep(self, seconds: float) -> None:
        self.advance(seconds)

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise InvalidParamsError("cannot advance a clock backwards")
        self._now_ns += round(seconds * 1e9)


def make_clock(simulated: bool):
    return SimulatedClock() if simulated else MonotonicClock()
