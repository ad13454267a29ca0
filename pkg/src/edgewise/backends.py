"""Classifier backends behind one contract: deterministic mock, recorded
latency-trace playback, and a client for an external model server speaking
the length-prefixed EWINFER1 protocol.

Each backend instance serves one in-flight inference at a time (batch size
is 1 everywhere); concurrency happens across instances, never within one.
"""

from __future__ import annotations

import hashlib
import json
import socket
import struct
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import Optional

from .clock import MonotonicClock
from .domain import (
    DEFAULT_SEED,
    AccelConfig,
    Classification,
    ClassLabel,
    COLOR_LABELS,
    Frame,
    REAL_LABELS,
    parse_label,
    scaled_size,
)
from .errors import (
    BackendError,
    BackendUnavailableError,
    DimensionMismatchError,
    InvalidParamsError,
    ProtocolError,
    SchemaError,
    UnknownLabelError,
)

PROTOCOL_MAGIC = b"EWINFER1"
MAX_RESPONSE_BYTES = 1 << 20

MOCK_MODES = ("hash", "constant", "echo")


@dataclass(frozen=True)
class BackendDescriptor:
    """What a backend is and the input geometry it expects."""

    kind: str
    accel: AccelConfig
    input_width: int
    input_height: int

    def __post_init__(self):
        if self.kind not in ("mock", "trace", "external"):
            raise InvalidParamsError(f"unknown backend kind: {self.kind!r}")
        expected = scaled_size(self.accel.resolution_scale)
        if (self.input_width, self.input_height) != expected:
            raise InvalidParamsError(
                f"input {self.input_width}x{self.input_height} does not match "
                f"base resolution scaled by {self.accel.resolution_scale} "
                f"(expected {expected[0]}x{expected[1]})"
            )

    @classmethod
    def for_accel(cls, kind: str, accel: AccelConfig) -> "BackendDescriptor":
        width, height = scaled_size(accel.resolution_scale)
        return cls(kind=kind, accel=accel, input_width=width, input_height=height)


@dataclass(frozen=True)
class LatencyTrace:
    """Recorded per-inference timings for one acceleration configuration.

    label_script, when present, is replayed cyclically as the classifier
    output; model_size_mb is carried as metadata only.
    """

    name: str
    accel: AccelConfig
    samples_s: tuple[float, ...]
    label_script: Optional[tuple[tuple[ClassLabel, float], ...]] = None
    model_size_mb: Optional[float] = None

    def __post_init__(self):
        if not self.samples_s:
            raise SchemaError(f"trace {self.name!r} has no samples")
        for sample in self.samples_s:
            if sample <= 0:
                raise SchemaError(
                    f"trace {self.name!r} has non-positive sample {sample}"
                )

    @property
    def mean_s(self) -> float:
        return fmean(self.samples_s)


def _accel_from_dict(obj: dict, ctx: str, name: str) -> AccelConfig:
    if not isinstance(obj, dict):
        raise SchemaError(f"{ctx}: accel must be an object")
    try:
        return AccelConfig(
            name=obj.get("name", name),
            precision=obj.get("precision", "fp32"),
            max_workspace_bytes=obj.get("max_workspace_bytes", 1 << 25),
            max_batch=obj.get("max_batch", 1),
            resolution_scale=obj.get("resolution_scale", 1.0),
            prebuilt_engine=obj.get("prebuilt_engine", False),
        )
    except (InvalidParamsError, TypeError) as exc:
        raise SchemaError(f"{ctx}: invalid accel config: {exc}") from exc


def _trace_from_dict(obj: dict, ctx: str) -> LatencyTrace:
    if not isinstance(obj, dict):
        raise SchemaError(f"{ctx}: trace must be an object")
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaError(f"{ctx}: missing or empty 'name'")
    samples = obj.get("samples_s")
    if not isinstance(samples, list) or not samples:
        raise SchemaError(f"{ctx} ({name}): 'samples_s' must be a non-empty list")
    for i, sample in enumerate(samples):
        if not isinstance(sample, (int, float)) or isinstance(sample, bool):
            raise SchemaError(f"{ctx} ({name}): samples_s[{i}] is not a number")
    script = None
    if obj.get("labels") is not None:
        raw = obj["labels"]
        if not isinstance(raw, list):
            raise SchemaError(f"{ctx} ({name}): 'labels' must be a list")
        entries = []
        for i, pair in enumerate(raw):
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise SchemaError(
                    f"{ctx} ({name}): labels[{i}] must be a [label, confidence] pair"
                )
            entries.append((parse_label(pair[0]), float(pair[1])))
        script = tuple(entries)
    size = obj.get("model_size_mb")
    if size is not None and (not isinstance(size, (int, float)) or size <= 0):
        raise SchemaError(f"{ctx} ({name}): model_size_mb must be a positive number")
    return LatencyTrace(
        name=name,
        accel=_accel_from_dict(obj.get("accel", {}), f"{ctx} ({name})", name),
        samples_s=tuple(float(s) for s in samples),
        label_script=script,
        model_size_mb=size,
    )


def load_traces(path) -> list[LatencyTrace]:
    """Load every trace in a JSON file (a single object or a list of them)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read trace file: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    items = data if isinstance(data, list) else [data]
    traces = [_trace_from_dict(obj, f"{path}[{i}]") for i, obj in enumerate(items)]
    names = [t.name for t in traces]
    if len(set(names)) != len(names):
        raise SchemaError(f"{path}: duplicate trace names")
    return traces


def load_trace(path, name: Optional[str] = None) -> LatencyTrace:
    """Load one trace: the only one in the file, or the one called `name`."""
    traces = load_traces(path)
    if name is None:
        if len(traces) != 1:
            raise SchemaError(
                f"{path}: holds {len(traces)} traces; pass a name to pick one"
            )
        return traces[0]
    for trace in traces:
        if trace.name == name:
            return trace
    raise SchemaError(f"{path}: no trace named {name!r}")


class Backend:
    """Contract: infer(frame) -> Classification for frames matching the
    descriptor's input geometry."""

    descriptor: BackendDescriptor

    def infer(self, frame: Frame) -> Classification:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def _check_dims(self, frame: Frame) -> None:
        d = self.descriptor
        if (frame.width, frame.height) != (d.input_width, d.input_height):
            raise DimensionMismatchError(
                f"{d.kind} backend expects {d.input_width}x{d.input_height}, "
                f"got frame {frame.width}x{frame.height}"
            )


class MockBackend(Backend):
    """Deterministic stand-in classifier; a pure function of (seed, pixels).

    hash mode derives label and confidence from a digest of the seed and the
    frame bytes, so identical frames classify identically but a varied
    source still produces varied labels. constant mode always answers the
    configured label at full confidence. echo mode decodes the signature
    colour a synthetic source painted, falling back to hash labeling for
    unknown pixels. The inference duration is a configured constant, never
    wall-measured, so runs stay reproducible.
    """

    def __init__(
        self,
        clock=None,
        accel: Optional[AccelConfig] = None,
        mode: str = "hash",
        label: Optional[ClassLabel] = None,
        seed: int = DEFAULT_SEED,
        duration_s: float = 0.05,
    ):
        if mode not in MOCK_MODES:
            raise InvalidParamsError(f"mock mode must be one of {MOCK_MODES}")
        if mode == "constant" and label is None:
            raise InvalidParamsError("constant mode needs a label")
        if duration_s <= 0:
            raise InvalidParamsError(f"duration_s must be > 0, got {duration_s}")
        self.clock = clock if clock is not None else MonotonicClock()
        self.mode = mode
        self.label = label
        self.seed = seed
        self.duration_s = duration_s
        self.descriptor = BackendDescriptor.for_accel(
            "mock", accel if accel is not None else AccelConfig(name="mock")
        )

    def infer(self, frame: Frame) -> Classification:
        self._check_dims(frame)
        if self.mode == "constant":
            label, confidence = self.label, 1.0
        elif self.mode == "echo":
            label, confidence = self._decode(frame)
        else:
            label, confidence = self._hashed(frame)
        self.clock.sleep(self.duration_s)
        return Classification(
            label=label,
            confidence=confidence,
            inference_duration=self.duration_s,
            frame_ts=frame.captured_at,
        )

    def _decode(self, frame: Frame) -> tuple[ClassLabel, float]:
        first = tuple(frame.pixels[0:3])
        label = COLOR_LABELS.get(first)
        if label is None:
            return self._hashed(frame)
        return label, 1.0

    def _hashed(self, frame: Frame) -> tuple[ClassLabel, float]:
        digest = hashlib.sha256(
            self.seed.to_bytes(8, "big", signed=True) + frame.pixels
        ).digest()
        label = REAL_LABELS[digest[0] % len(REAL_LABELS)]
        confidence = 0.5 + digest[1] / 510.0
        return label, confidence


class TraceBackend(Backend):
    """Replays recorded per-inference timings, cycling any scripted labels.

    The clock decides playback speed: a SimulatedClock makes replay instant
    and deterministic, a MonotonicClock sleeps each scripted duration for
    end-to-end demos. Without a label script the five categories rotate, so
    a majority never forms and the replay exercises timing only.
    """

    def __init__(self, trace: LatencyTrace, clock=None):
        self.trace = trace
        self.clock = clock if clock is not None else MonotonicClock()
        self.descriptor = BackendDescriptor.for_accel("trace", trace.accel)
        self._cursor = 0

    def infer(self, frame: Frame) -> Classification:
        self._check_dims(frame)
        duration = self.trace.samples_s[self._cursor % len(self.trace.samples_s)]
        if self.trace.label_script:
            label, confidence = self.trace.label_script[
                self._cursor % len(self.trace.label_script)
            ]
        else:
            label = REAL_LABELS[self._cursor % len(REAL_LABELS)]
            confidence = 1.0
        self._cursor += 1
        self.clock.sleep(duration)
        return Classification(
            label=label,
            confidence=confidence,
            inference_duration=duration,
            frame_ts=frame.captured_at,
        )


def _read_exact(sock: socket.socket, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ProtocolError(
                f"connection closed mid-message ({count - remaining}/{count} bytes)"
            )
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def encode_request(frame: Frame) -> bytes:
    """Length-prefixed inference request: magic, dimensions, raw RGB8."""
    payload = (
        PROTOCOL_MAGIC + struct.pack(">II", frame.width, frame.height) + frame.pixels
    )
    return struct.pack(">I", len(payload)) + payload


class ExternalBackend(Backend):
    """Client for a model server speaking the EWINFER1 protocol over TCP.

    Connects lazily on first use and keeps the connection for subsequent
    requests. Labels and confidences are validated at this boundary: a
    response naming an unknown category or an out-of-range confidence is a
    protocol error, never a Classification.
    """

    def __init__(
        self,
        host: str,
        port: int,
        accel: Optional[AccelConfig] = None,
        clock=None,
        timeout_s: float = 10.0,
    ):
        self.host = host
        self.port = port
        self.timeout_s = timeout_s
        self.clock = clock if clock is not None else MonotonicClock()
        self.descriptor = BackendDescriptor.for_accel(
            "external", accel if accel is not None else AccelConfig(name="external")
        )
        self._sock: Optional[socket.socket] = None

    def _connected(self) -> socket.socket:
        if self._sock is None:
            try:
                self._sock = socket.create_connection(
                    (self.host, self.port), timeout=self.timeout_s
                )
            except OSError as exc:
                raise BackendUnavailableError(
                    f"cannot reach model server {self.host}:{self.port}: {exc}"
                ) from exc
        return self._sock

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def infer(self, frame: Frame) -> Classification:
        self._check_dims(frame)
        request = encode_request(frame)
        sock = self._connected()
        try:
            sock.sendall(request)
            header = _read_exact(sock, 4)
            (length,) = struct.unpack(">I", header)
            if length > MAX_RESPONSE_BYTES:
                raise ProtocolError(f"response length {length} exceeds limit")
            body = _read_exact(sock, length)
        except ProtocolError:
            self.close()
            raise
        except OSError as exc:
            self.close()
            raise BackendUnavailableError(
                f"model server {self.host}:{self.port} I/O failure: {exc}"
            ) from exc
        return self._parse_response(body, frame)

    def _parse_response(self, body: bytes, frame: Frame) -> Classification:
        try:
            reply = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"response is not valid JSON: {exc}") from exc
        if not isinstance(reply, dict):
            raise ProtocolError("response is not a JSON object")
        if "error" in reply:
            raise BackendError(f"model server error: {reply['error']}")
        for key in ("label", "confidence", "duration_ms"):
            if key not in reply:
                raise ProtocolError(f"response missing {key!r}")
        try:
            label = parse_label(str(reply["label"]))
        except UnknownLabelError as exc:
            raise ProtocolError(str(exc)) from exc
        confidence = reply["confidence"]
        duration_ms = reply["duration_ms"]
        if not isinstance(confidence, (int, float)) or not 0.0 <= confidence <= 1.0:
            raise ProtocolError(f"confidence {confidence!r} outside [0, 1]")
        if not isinstance(duration_ms, (int, float)) or duration_ms <= 0:
            raise ProtocolError(f"duration_ms {duration_ms!r} must be > 0")
        duration_s = duration_ms / 1000.0
        self.clock.advance(duration_s)
        return Classification(
            label=label,
            confidence=float(confidence),
            inference_duration=duration_s,
            frame_ts=frame.captured_at,
        )
