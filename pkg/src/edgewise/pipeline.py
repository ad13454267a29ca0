"""Pipeline orchestration: frame source -> resize -> backend -> debounce ->
actuation sink, with telemetry taps along the way.

Execution is per-frame serial (capture, infer, push); batch size is 1 and
one pipeline owns its queue and backend. In simulated-clock mode an entire
run is deterministic: identical config and sources give byte-identical
summaries.
"""

from __future__ import annotations

import json
import queue as queue_module
import socket
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import IO, Iterator, Optional

from PIL import Image

from .backends import (
    Backend,
    ExternalBackend,
    MockBackend,
    TraceBackend,
    _accel_from_dict,
    load_trace,
)
from .clock import make_clock
from .debounce import DebounceQueue
from .domain import (
    BASE_HEIGHT,
    BASE_WIDTH,
    DEFAULT_SEED,
    ClassLabel,
    Frame,
    LABEL_COLORS,
    parse_label,
)
from .errors import BackendError, InvalidParamsError, SchemaError
from .telemetry import PowerProfile, PowerTable, TelemetryCollector


def resize_to(frame: Frame, width: int, height: int) -> Frame:
    """Bilinear resample to an explicit target size."""
    if width < 1 or height < 1:
        raise InvalidParamsError(f"target size must be >= 1x1, got {width}x{height}")
    if (width, height) == (frame.width, frame.height):
        return frame
    image = Image.frombytes("RGB", (frame.width, frame.height), frame.pixels)
    resized = image.resize((width, height), Image.Resampling.BILINEAR)
    return Frame(
        width=width,
        height=height,
        pixels=resized.tobytes(),
        captured_at=frame.captured_at,
        capture_duration=frame.capture_duration,
    )


def resize_frame(frame: Frame, scale: float) -> Frame:
    """Bilinear downscale by a fraction of the original size; 1.0 is identity."""
    if not 0.0 < scale <= 1.0:
        raise InvalidParamsError(f"scale must lie in (0, 1], got {scale}")
    if scale == 1.0:
        return frame
    return resize_to(frame, round(frame.width * scale), round(frame.height * scale))


class SyntheticSource:
    """Generates solid-colour frames from a label script.

    Each label paints its signature colour so echo-mode mocks can recover
    it. Capture overhead is consumed through the clock (default 20 ms, the
    typical camera-module cost), which on a simulated clock is instant.
    With frames=None the script plays once; otherwise it cycles to the
    requested count.
    """

    def __init__(
        self,
        labels,
        clock,
        width: int = BASE_WIDTH,
        height: int = BASE_HEIGHT,
        capture_duration_s: float = 0.020,
        frames: Optional[int] = None,
    ):
        self.labels = [
            label if isinstance(label, ClassLabel) else parse_label(label)
            for label in labels
        ]
        if not self.labels:
            raise SchemaError("synthetic source needs at least one label")
        if capture_duration_s < 0:
            raise InvalidParamsError("capture duration must be >= 0")
        self.clock = clock
        self.width = width
        self.height = height
        self.capture_duration_s = capture_duration_s
        self.total = len(self.labels) if frames is None else frames

    def __len__(self) -> int:
        return self.total

    def __iter__(self) -> Iterator[tuple[Frame, ClassLabel]]:
        pixel_count = self.width * self.height
        for i in range(self.total):
            label = self.labels[i % len(self.labels)]
            self.clock.sleep(self.capture_duration_s)
            frame = Frame(
                width=self.width,
                height=self.height,
                pixels=bytes(LABEL_COLORS[label]) * pixel_count,
                captured_at=self.clock.now_ns(),
                capture_duration=self.capture_duration_s,
            )
            yield frame, label


class DirectorySource:
    """Streams labelled frames from <root>/<category>/*.{png,jpg,jpeg}.

    The directory layout is the ground truth: every subdirectory must be
    named after a category and each image is tagged with it. Ordering is
    lexicographic by subdirectory then filename, so runs are reproducible.
    """

    EXTENSIONS = (".png", ".jpg", ".jpeg")

    def __init__(self, root, clock, capture_duration_s: float = 0.0):
        self.root = Path(root)
        self.clock = clock
        self.capture_duration_s = capture_duration_s
        self.entries = self._scan()

    def _scan(self) -> list[tuple[Path, ClassLabel]]:
        if not self.root.is_dir():
            raise SchemaError(f"{self.root}: not a directory")
        entries = []
        for sub in sorted(p for p in self.root.iterdir() if p.is_dir()):
            label = parse_label(sub.name)
            for file in sorted(sub.iterdir()):
                if file.is_file() and file.suffix.lower() in self.EXTENSIONS:
                    entries.append((file, label))
        return entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[Frame, ClassLabel]]:
        for file, label in self.entries:
            self.clock.sleep(self.capture_duration_s)
            try:
                image = Image.open(file)
                image = image.convert("RGB")
            except OSError as exc:
                raise SchemaError(f"unreadable image {file}: {exc}") from exc
            yield Frame(
                width=image.width,
                height=image.height,
                pixels=image.tobytes(),
                captured_at=self.clock.now_ns(),
                capture_duration=self.capture_duration_s,
            ), label


def ingest_directory(path, clock=None, capture_duration_s: float = 0.0) -> DirectorySource:
    """Open a label-subdirectory tree as a frame source.

    Unknown subdirectory names are rejected immediately; unreadable images
    fail at iteration time.
    """
    from .clock import MonotonicClock

    return DirectorySource(
        path,
        clock if clock is not None else MonotonicClock(),
        capture_duration_s=capture_duration_s,
    )


class NullSink:
    def emit(self, event: dict) -> None:
        pass

    def close(self) -> None:
        pass


class StreamSink:
    """Writes one JSON object per event to a text stream."""

    def __init__(self, stream: IO[str]):
        self.stream = stream

    def emit(self, event: dict) -> None:
        self.stream.write(json.dumps(event, sort_keys=True) + "\n")
        self.stream.flush()

    def close(self) -> None:
        pass


class JsonlSink(StreamSink):
    """Appends events to a JSON-lines file."""

    def __init__(self, path):
        self.path = Path(path)
        super().__init__(self.path.open("w"))

    def close(self) -> None:
        self.stream.close()


class WireSink:
    """Sends newline-delimited JSON events to a TCP endpoint."""

    def __init__(self, host: str, port: int, timeout_s: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout_s)

    def emit(self, event: dict) -> None:
        self.sock.sendall((json.dumps(event, sort_keys=True) + "\n").encode())

    def close(self) -> None:
        self.sock.close()


@dataclass(frozen=True)
class StopCondition:
    """Run until any bound is hit; None bounds never trigger."""

    max_frames: Optional[int] = None
    max_seconds: Optional[float] = None


@dataclass
class RunSummary:
    """Everything a pipeline run produced, JSON-serialisable and stable."""

    frames: int = 0
    inferences: int = 0
    pushes: int = 0
    events: list = field(default_factory=list)
    committed: str = "none"
    duration_s: float = 0.0
    mean_inference_s: float = 0.0
    mean_capture_s: float = 0.0
    ips: float = 0.0
    telemetry: list = field(default_factory=list)
    incomplete: bool = False
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "inferences": self.inferences,
            "pushes": self.pushes,
            "events": self.events,
            "committed": self.committed,
            "duration_s": self.duration_s,
            "mean_inference_s": self.mean_inference_s,
            "mean_capture_s": self.mean_capture_s,
            "ips": self.ips,
            "telemetry": self.telemetry,
            "incomplete": self.incomplete,
            "error": self.error,
        }

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n").encode()


class _FrameFeed:
    """Produces frames for the processing loop.

    Serial mode pulls straight from the source (capture time passes inline
    on the shared clock). Overlap mode runs capture as a producer stage with
    a hand-off of depth 1, so the next frame is captured while the current
    one is inferring: real clocks get an actual producer thread, simulated
    clocks get the equivalent schedule computed on a detached producer
    timeline (threads racing one virtual clock would lose determinism).
    """

    _DONE = object()

    def __init__(self, source, clock, overlap: bool, source_clock=None):
        self.clock = clock
        self.overlap = overlap
        self.mode = "serial"
        if overlap and clock.simulated:
            self.mode = "analytic"
            self.source_clock = source_clock
            if source_clock is None or source_clock is clock:
                raise InvalidParamsError(
                    "simulated overlap needs the source on its own clock"
                )
        elif overlap:
            self.mode = "threaded"
        self._iter = iter(source)
        self._producer_error = None
        if self.mode == "threaded":
            self._handoff = queue_module.Queue(maxsize=1)
            self._stop_event = threading.Event()
            self._thread = threading.Thread(target=self._produce, daemon=True)
            self._thread.start()

    def _produce(self):
        try:
            for item in self._iter:
                while not self._stop_event.is_set():
                    try:
                        self._handoff.put(item, timeout=0.1)
                        break
                    except queue_module.Full:
                        continue
                if self._stop_event.is_set():
                    return
        except BaseException as exc:  # surfaces in the consumer
            self._producer_error = exc
        finally:
            try:
                self._handoff.put(self._DONE, timeout=1.0)
            except queue_module.Full:
                pass

    def next_frame(self):
        """Next (frame, truth) or None when the source is exhausted."""
        if self.mode == "threaded":
            item = self._handoff.get()
            if item is self._DONE:
                if self._producer_error is not None:
                    raise self._producer_error
                return None
            return item
        try:
            return next(self._iter)
        except StopIteration:
            return None

    def on_inference_started(self) -> None:
        # depth-1 slot frees when the consumer takes a frame; the producer
        # may capture the next one from that moment or from its own finish,
        # whichever is later
        if self.mode == "analytic":
            behind = (self.clock.now_ns() - self.source_clock.now_ns()) / 1e9
            if behind > 0:
                self.source_clock.advance(behind)

    def align_consumer(self, frame) -> None:
        # inference starts once the frame exists and the backend is free
        if self.mode == "analytic" and frame.captured_at > self.clock.now_ns():
            self.clock.advance((frame.captured_at - self.clock.now_ns()) / 1e9)

    def close(self) -> None:
        if self.mode == "threaded":
            self._stop_event.set()
            while True:
                try:
                    self._handoff.get_nowait()
                except Exception:
                    break
            self._thread.join(timeout=5)


def run_pipeline(
    source,
    backend: Backend,
    clock,
    queue: DebounceQueue,
    sink=None,
    collector: Optional[TelemetryCollector] = None,
    power: Optional[PowerProfile] = None,
    stop: Optional[StopCondition] = None,
    overlap: bool = False,
    source_clock=None,
) -> RunSummary:
    """Drive frames through the backend and debounce queue until a stop bound
    or source exhaustion.

    Every frame is resized to the backend's input geometry, inferred, and
    pushed; actuation events go to the sink as they happen. Backend failures
    end the run early with the partial summary flagged incomplete; sink
    failures propagate (there is nowhere left to report to).

    With overlap=True capture runs as a second stage with a hand-off of
    depth 1 (next frame captured during the current inference). On a
    simulated clock the source must be built on its own SimulatedClock,
    passed as source_clock; run_from_config wires this automatically.
    """
    sink = sink if sink is not None else NullSink()
    collector = collector if collector is not None else TelemetryCollector()
    stop = stop if stop is not None else StopCondition()
    if power is not None:
        collector.set_power_state("inferencing", power.table.inferencing)

    summary = RunSummary()
    durations: list[float] = []
    captures: list[float] = []
    start_ns = clock.now_ns()
    target_w = backend.descriptor.input_width
    target_h = backend.descriptor.input_height

    feed = _FrameFeed(source, clock, overlap, source_clock)
    try:
        while True:
            if stop.max_frames is not None and summary.frames >= stop.max_frames:
                break
            if (
                stop.max_seconds is not None
                and (clock.now_ns() - start_ns) / 1e9 >= stop.max_seconds
            ):
                break
            item = feed.next_frame()
            if item is None:
                break
            frame, _truth = item
            feed.align_consumer(frame)
            feed.on_inference_started()
            frame = resize_to(frame, target_w, target_h)
            try:
                result = backend.infer(frame)
            except BackendError as exc:
                summary.incomplete = True
                summary.error = str(exc)
                break
            summary.frames += 1
            summary.inferences += 1
            durations.append(result.inference_duration)
            captures.append(frame.capture_duration)
            collector.record_capture(frame.capture_duration)
            collector.record_inference(
                clock.now_ns() / 1e9, result.inference_duration
            )
            event = queue.push(result)
            summary.pushes += 1
            if event is not None:
                record = {
                    "t": (event.at - start_ns) / 1e9,
                    "from": str(event.previous_state),
                    "to": str(event.new_state),
                    "votes": event.votes,
                }
                summary.events.append(record)
                sink.emit(record)
    finally:
        feed.close()

    summary.committed = str(queue.committed)
    summary.duration_s = (clock.now_ns() - start_ns) / 1e9
    summary.mean_inference_s = fmean(durations) if durations else 0.0
    summary.mean_capture_s = fmean(captures) if captures else 0.0
    summary.ips = 1.0 / summary.mean_inference_s if summary.mean_inference_s > 0 else 0.0
    summary.telemetry = [collector.sample(clock.now_ns() / 1e9).to_dict()]
    return summary


# --- config-file assembly ---------------------------------------------------


def _require(obj: dict, key: str, ctx: str):
    if key not in obj:
        raise SchemaError(f"{ctx}: missing required field {key!r}")
    return obj[key]


def power_profile_from_dict(obj: dict, ctx: str = "power") -> PowerProfile:
    if not isinstance(obj, dict):
        raise SchemaError(f"{ctx}: must be an object")
    table = _require(obj, "table", ctx)
    if not isinstance(table, dict):
        raise SchemaError(f"{ctx}.table: must be an object")
    try:
        return PowerProfile(
            mode=_require(obj, "mode", ctx),
            table=PowerTable(
                idle_no_model=_require(table, "idle_no_model", f"{ctx}.table"),
                idle_model_loaded=_require(table, "idle_model_loaded", f"{ctx}.table"),
                inferencing=_require(table, "inferencing", f"{ctx}.table"),
                allow_unordered=table.get("allow_unordered", False),
            ),
        )
    except (InvalidParamsError, TypeError) as exc:
        raise SchemaError(f"{ctx}: {exc}") from exc


def _build_source(obj: dict, clock, base_dir: Path):
    kind = _require(obj, "kind", "source")
    if kind == "synthetic":
        return SyntheticSource(
            labels=_require(obj, "labels", "source"),
            clock=clock,
            width=obj.get("width", BASE_WIDTH),
            height=obj.get("height", BASE_HEIGHT),
            capture_duration_s=obj.get("capture_duration_s", 0.020),
            frames=obj.get("frames"),
        )
    if kind == "directory":
        return DirectorySource(
            base_dir / _require(obj, "path", "source"),
            clock,
            capture_duration_s=obj.get("capture_duration_s", 0.0),
        )
    raise SchemaError(f"source.kind: unknown kind {kind!r}")


def _build_backend(obj: dict, clock, base_dir: Path, seed: Optional[int]):
    kind = _require(obj, "kind", "backend")
    accel = None
    if "accel" in obj:
        accel = _accel_from_dict(obj["accel"], "backend.accel", obj.get("name", kind))
    if kind == "mock":
        label = obj.get("label")
        return MockBackend(
            clock=clock,
            accel=accel,
            mode=obj.get("mode", "hash"),
            label=parse_label(label) if label is not None else None,
            seed=seed if seed is not None else obj.get("seed", DEFAULT_SEED),
            duration_s=obj.get("duration_s", 0.05),
        )
    if kind == "trace":
        path = base_dir / _require(obj, "traces_file", "backend")
        trace = load_trace(path, obj.get("trace"))
        return TraceBackend(trace, clock=clock)
    if kind == "external":
        return ExternalBackend(
            host=_require(obj, "host", "backend"),
            port=_require(obj, "port", "backend"),
            accel=accel,
            clock=clock,
            timeout_s=obj.get("timeout_s", 10.0),
        )
    raise SchemaError(f"backend.kind: unknown kind {kind!r}")


def _build_sink(obj: Optional[dict], base_dir: Path):
    if obj is None:
        return NullSink()
    kind = _require(obj, "kind", "sink")
    if kind == "null":
        return NullSink()
    if kind == "stdout":
        return StreamSink(sys.stdout)
    if kind == "jsonl":
        return JsonlSink(base_dir / _require(obj, "path", "sink"))
    if kind == "wire":
        return WireSink(_require(obj, "host", "sink"), _require(obj, "port", "sink"))
    raise SchemaError(f"sink.kind: unknown kind {kind!r}")


def run_from_config(
    config: dict,
    base_dir,
    simulated: Optional[bool] = None,
    seed: Optional[int] = None,
    stop: Optional[StopCondition] = None,
) -> RunSummary:
    """Assemble and run a pipeline from a parsed JSON run config.

    Relative paths resolve against base_dir (normally the config file's
    directory). simulated/seed/stop override the config when given.
    """
    if not isinstance(config, dict):
        raise SchemaError("run config must be a JSON object")
    base_dir = Path(base_dir)
    use_simulated = (
        simulated if simulated is not None else config.get("simulated_clock", True)
    )
    clock = make_clock(use_simulated)
    overlap = bool(config.get("overlap_capture", False))
    source_clock = clock
    if overlap and use_simulated:
        # capture runs on its own timeline so the stages can overlap
        # without two threads racing one virtual clock
        source_clock = make_clock(True)
    source = _build_source(
        _require(config, "source", "config"), source_clock, base_dir
    )
    backend = _build_backend(
        _require(config, "backend", "config"), clock, base_dir, seed
    )
    queue = DebounceQueue(
        capacity=config.get("queue_capacity", 10),
        confidence_floor=config.get("confidence_floor"),
    )
    sink = _build_sink(config.get("sink"), base_dir)
    power = None
    if config.get("power") is not None:
        power = power_profile_from_dict(config["power"])
    if stop is None:
        stop_obj = config.get("stop", {})
        if not isinstance(stop_obj, dict):
            raise SchemaError("stop: must be an object")
        stop = StopCondition(
            max_frames=stop_obj.get("frames"), max_seconds=stop_obj.get("seconds")
        )
    collector = TelemetryCollector(window_s=config.get("telemetry_window_s", 1.0))
    try:
        return run_pipeline(
            source=source,
            backend=backend,
            clock=clock,
            queue=queue,
            sink=sink,
            collector=collector,
            power=power,
            stop=stop,
            overlap=overlap,
            source_clock=source_clock if overlap and use_simulated else None,
        )
    finally:
        sink.close()
        backend.close()
