"""Closed-form decomposition and prediction of object-to-actuation latency.

The total delay from showing an object to the servo moving splits into a
queue term (how long a new object needs to win the majority vote, about
half the queue plus one inference) and a servo term (signal propagation
plus motion). Both scale with the per-inference period 1/IPS. Queue length
division is real-valued, so odd lengths interpolate between the even cases.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidParamsError


@dataclass(frozen=True)
class LatencyParams:
    """Inputs to the decomposition.

    n is the queue length used in the measurement; n_star the length to
    predict for; t_cts the measured classification-to-servo delay in
    seconds. per_inference_s overrides 1/ips when the period was measured
    directly. servo_base_s feeds predict_total_latency.
    """

    n: int
    n_star: int
    ips: float
    t_cts: float
    per_inference_s: float | None = None
    servo_base_s: float = 0.0

    def __post_init__(self):
        if self.ips <= 0:
            raise InvalidParamsError(f"ips must be > 0, got {self.ips}")
        if self.t_cts < 0:
            raise InvalidParamsError(f"t_cts must be >= 0, got {self.t_cts}")
        if self.n < 0 or self.n_star < 0:
            raise InvalidParamsError("queue lengths must be >= 0")
        if self.per_inference_s is not None and self.per_inference_s <= 0:
            raise InvalidParamsError(
                f"per_inference_s must be > 0, got {self.per_inference_s}"
            )
        if self.servo_base_s < 0:
            raise InvalidParamsError("servo_base_s must be >= 0")

    @property
    def period_s(self) -> float:
        """Seconds per inference: the explicit override, else 1/ips."""
        if self.per_inference_s is not None:
            return self.per_inference_s
        return 1.0 / self.ips


@dataclass(frozen=True)
class LatencyBreakdown:
    """Queue and servo components of the total delay, in seconds.

    servo_negative flags a measurement inconsistency: t_cts was too small
    for the stated queue length and throughput. The numbers are still
    reported so the user can see the contradiction.
    """

    t_queue: float
    t_servo: float
    t_total: float
    servo_negative: bool = False

    def to_dict(self) -> dict:
        return {
            "t_queue_s": self.t_queue,
            "t_servo_s": self.t_servo,
            "t_total_s": self.t_total,
            "servo_negative": self.servo_negative,
        }


def decompose_latency(params: LatencyParams) -> LatencyBreakdown:
    """Split a measured delay into queue and servo terms.

    t_queue = (n_star/2 + 1) * period
    t_servo = t_cts - (n/2 + 1) * period
    t_total = t_queue + t_servo

    With n == n_star the queue terms cancel and t_total == t_cts exactly.
    """
    period = params.period_s
    t_queue = (params.n_star / 2 + 1) * period
    t_servo = params.t_cts - (params.n / 2 + 1) * period
    return LatencyBreakdown(
        t_queue=t_queue,
        t_servo=t_servo,
        t_total=t_queue + t_servo,
        servo_negative=t_servo < 0,
    )


def predict_total_latency(n: int, per_inference_s: float, servo_base_s: float) -> float:
    """Expected object-to-actuation delay for a queue of length n.

    per_inference_s * (n/2 + 1) + servo_base_s; strictly increasing in n.
    """
    if n < 0:
        raise InvalidParamsError(f"queue length must be >= 0, got {n}")
    if per_inference_s <= 0:
        raise InvalidParamsError(
            f"per-inference time must be > 0, got {per_inference_s}"
        )
    if servo_base_s < 0:
        raise InvalidParamsError(f"servo base must be >= 0, got {servo_base_s}")
    return per_inference_s * (n / 2 + 1) + servo_base_s
