"""Core vocabulary types shared by every other module.

All types here are immutable values, safe to copy between threads. Durations
are float seconds; timestamps are integer nanoseconds from a monotonic clock
so latency arithmetic survives wall-clock adjustments.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import InvalidParamsError, UnknownLabelError

# Native input geometry of the classifier family; sources default to it and
# backend input sizes are derived from it via resolution_scale.
BASE_WIDTH = 512
BASE_HEIGHT = 384

DEFAULT_WORKSPACE_BYTES = 1 << 25  # 33,554,432

# Fixed seed for mock backends so default runs are reproducible.
DEFAULT_SEED = 20


class ClassLabel(Enum):
    """The five recycling categories, plus NONE for "no committed state yet".

    NONE is never produced by a classifier; it only appears as the initial
    committed state of a debounce queue.
    """

    CARDBOARD = "cardboard"
    GLASS = "glass"
    METAL = "metal"
    PAPER = "paper"
    PLASTIC = "plastic"
    NONE = "none"

    def __str__(self) -> str:
        return self.value


REAL_LABELS = (
    ClassLabel.CARDBOARD,
    ClassLabel.GLASS,
    ClassLabel.METAL,
    ClassLabel.PAPER,
    ClassLabel.PLASTIC,
)

# Signature fill colours: synthetic sources paint them, echo-mode mock
# backends decode them. Arbitrary but fixed.
LABEL_COLORS = {
    ClassLabel.CARDBOARD: (181, 134, 84),
    ClassLabel.GLASS: (70, 160, 155),
    ClassLabel.METAL: (140, 140, 150),
    ClassLabel.PAPER: (235, 235, 225),
    ClassLabel.PLASTIC: (220, 90, 60),
}
COLOR_LABELS = {color: label for label, color in LABEL_COLORS.items()}


def parse_label(text: str) -> ClassLabel:
    """Parse a category name case-insensitively; NONE is not parseable."""
    lowered = text.strip().lower()
    for label in REAL_LABELS:
        if label.value == lowered:
            return label
    raise UnknownLabelError(f"unknown label: {text!r}")


def scaled_size(scale: float) -> tuple[int, int]:
    """Base resolution scaled by a fraction, rounded to whole pixels."""
    if not 0.0 < scale <= 1.0:
        raise InvalidParamsError(f"resolution scale must lie in (0, 1], got {scale}")
    return round(BASE_WIDTH * scale), round(BASE_HEIGHT * scale)


@dataclass(frozen=True)
class Frame:
    """A raw RGB8 image with its capture timing.

    pixels is row-major RGB8, so len(pixels) == width * height * 3.
    captured_at is monotonic nanoseconds; capture_duration is the time the
    camera (or its simulation) spent producing the frame, in seconds.
    """

    width: int
    height: int
    pixels: bytes
    captured_at: int
    capture_duration: float = 0.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidParamsError(
                f"frame dimensions must be >= 1, got {self.width}x{self.height}"
            )
        expected = self.width * self.height * 3
        if len(self.pixels) != expected:
            raise InvalidParamsError(
                f"pixel buffer is {len(self.pixels)} bytes, expected {expected} "
                f"for {self.width}x{self.height} RGB8"
            )


@dataclass(frozen=True)
class Classification:
    """One classifier output: a real label, its confidence, and timing."""

    label: ClassLabel
    confidence: float
    inference_duration: float
    frame_ts: int

    def __post_init__(self):
        if self.label is ClassLabel.NONE:
            raise InvalidParamsError("classifiers never emit the NONE label")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidParamsError(f"confidence {self.confidence} outside [0, 1]")
        if self.inference_duration <= 0:
            raise InvalidParamsError(
                f"inference_duration must be > 0, got {self.inference_duration}"
            )


@dataclass(frozen=True)
class AccelConfig:
    """How an inference engine was optimised: precision, workspace, scaling."""

    name: str
    precision: str = "fp32"
    max_workspace_bytes: int = DEFAULT_WORKSPACE_BYTES
    max_batch: int = 1
    resolution_scale: float = 1.0
    prebuilt_engine: bool = False

    def __post_init__(self):
        if self.precision not in ("fp32", "fp16"):
            raise InvalidParamsError(
                f"precision must be 'fp32' or 'fp16', got {self.precision!r}"
            )
        if self.max_workspace_bytes <= 0:
            raise InvalidParamsError("max_workspace_bytes must be > 0")
        if self.max_batch < 1:
            raise InvalidParamsError(f"max_batch must be >= 1, got {self.max_batch}")
        if not 0.0 < self.resolution_scale <= 1.0:
            raise InvalidParamsError(
                f"resolution_scale must lie in (0, 1], got {self.resolution_scale}"
            )

    @property
    def input_size(self) -> tuple[int, int]:
        return scaled_size(self.resolution_scale)
