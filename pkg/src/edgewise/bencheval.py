"""Configuration-sweep benchmarking and real-world accuracy accounting.

A sweep replays latency traces through the full pipeline for every
(trace, power profile, queue size) combination and reports throughput,
efficiency, and speedup against a named baseline. The evaluation side
scores labelled predictions with the including/excluding-errors convention:
"excluding errors" counts environmentally-flagged misclassifications as if
they had been resolved (numerator adjustment, denominator unchanged).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean, median
from typing import Optional, Sequence

from .backends import LatencyTrace, TraceBackend, load_traces
from .clock import make_clock
from .debounce import DebounceQueue
from .domain import REAL_LABELS, ClassLabel, parse_label
from .errors import EdgewiseError, InvalidParamsError, ReportError, SchemaError
from .pipeline import (
    NullSink,
    StopCondition,
    SyntheticSource,
    power_profile_from_dict,
    run_pipeline,
)
from .telemetry import REALTIME_IPS, PowerProfile, TelemetryCollector

ERROR_FLAGS = ("glare", "zoom", "other")


# --- benchmark sweep ---------------------------------------------------------


@dataclass(frozen=True)
class SweepCombo:
    trace: LatencyTrace
    power: Optional[PowerProfile]
    queue_capacity: int


@dataclass
class SweepSpec:
    """The cross product a sweep will visit, plus run settings."""

    combos: list[SweepCombo]
    baseline: str
    repetitions: int = 1
    simulated_clock: bool = True
    frames: Optional[int] = None  # per repetition; default one full trace cycle

    def __post_init__(self):
        if not self.combos:
            raise SchemaError("sweep spec has no combinations")
        if self.repetitions < 1:
            raise SchemaError(f"repetitions must be >= 1, got {self.repetitions}")
        names = {combo.trace.name for combo in self.combos}
        if self.baseline not in names:
            raise SchemaError(
                f"baseline {self.baseline!r} is not among the swept traces"
            )


@dataclass
class BenchRow:
    """Measured results for one sweep combination (or its failure)."""

    name: str
    precision: str
    resolution_scale: float
    queue_capacity: int
    power_mode: Optional[str] = None
    watts: Optional[float] = None
    mean_inference_s: Optional[float] = None
    median_inference_s: Optional[float] = None
    ips: Optional[float] = None
    efficiency: Optional[float] = None
    speedup: Optional[float] = None
    realtime: Optional[bool] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "precision": self.precision,
            "resolution_scale": self.resolution_scale,
            "queue_capacity": self.queue_capacity,
            "power_mode": self.power_mode,
            "watts": self.watts,
            "mean_inference_s": self.mean_inference_s,
            "median_inference_s": self.median_inference_s,
            "ips": self.ips,
            "efficiency": self.efficiency,
            "speedup": self.speedup,
            "realtime": self.realtime,
            "error": self.error,
        }


@dataclass
class BenchReport:
    baseline: str
    rows: list[BenchRow] = field(default_factory=list)

    def row(self, name: str) -> BenchRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"baseline": self.baseline, "rows": [r.to_dict() for r in self.rows]}


def load_sweep_spec(path) -> SweepSpec:
    """Parse a sweep spec file; trace paths resolve against the spec file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read sweep spec: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: sweep spec must be a JSON object")
    traces_file = data.get("traces_file")
    if not traces_file:
        raise SchemaError(f"{path}: missing 'traces_file'")
    traces = load_traces(path.parent / traces_file)
    wanted = data.get("traces")
    if wanted is not None:
        by_name = {t.name: t for t in traces}
        missing = [n for n in wanted if n not in by_name]
        if missing:
            raise SchemaError(f"{path}: traces not in file: {missing}")
        traces = [by_name[n] for n in wanted]
    profiles: list[Optional[PowerProfile]] = [None]
    if data.get("power_profiles"):
        profiles = [
            power_profile_from_dict(p, f"power_profiles[{i}]")
            for i, p in enumerate(data["power_profiles"])
        ]
    queue_sizes = data.get("queue_sizes", [10])
    combos = [
        SweepCombo(trace=trace, power=profile, queue_capacity=size)
        for trace in traces
        for profile in profiles
        for size in queue_sizes
    ]
    baseline = data.get("baseline")
    if not baseline:
        raise SchemaError(f"{path}: missing 'baseline'")
    return SweepSpec(
        combos=combos,
        baseline=baseline,
        repetitions=data.get("repetitions", 1),
        simulated_clock=data.get("simulated_clock", True),
        frames=data.get("frames"),
    )


def _measure_combo(combo: SweepCombo, spec: SweepSpec) -> list[float]:
    """Replay one combination and return its raw per-inference durations."""
    durations: list[float] = []
    frames = spec.frames if spec.frames is not None else len(combo.trace.samples_s)
    for _ in range(spec.repetitions):
        clock = make_clock(spec.simulated_clock)
        collector = TelemetryCollector()
        backend = TraceBackend(combo.trace, clock=clock)
        source = SyntheticSource(
            labels=list(REAL_LABELS), clock=clock, frames=frames
        )
        run_pipeline(
            source=source,
            backend=backend,
            clock=clock,
            queue=DebounceQueue(combo.queue_capacity),
            sink=NullSink(),
            collector=collector,
            power=combo.power,
            stop=StopCondition(max_frames=frames),
        )
        durations.extend(collector.inference_durations)
    return durations


def run_sweep(spec: SweepSpec) -> BenchReport:
    """Benchmark every combination; a failing cell is recorded, not fatal.

    Speedup is the ratio of mean inference times, baseline over row, so the
    baseline row always reads exactly 1.0.
    """
    report = BenchReport(baseline=spec.baseline)
    means: dict[str, float] = {}
    for combo in spec.combos:
        row = BenchRow(
            name=combo.trace.name,
            precision=combo.trace.accel.precision,
            resolution_scale=combo.trace.accel.resolution_scale,
            queue_capacity=combo.queue_capacity,
            power_mode=combo.power.mode if combo.power else None,
            watts=combo.power.table.inferencing if combo.power else None,
        )
        try:
            durations = _measure_combo(combo, spec)
            if not durations:
                raise InvalidParamsError("combination produced no inferences")
            row.mean_inference_s = fmean(durations)
            row.median_inference_s = median(durations)
            row.ips = 1.0 / row.mean_inference_s
            row.realtime = row.ips >= REALTIME_IPS
            if row.watts is not None:
                row.efficiency = row.ips / row.watts
            means.setdefault(combo.trace.name, row.mean_inference_s)
        except EdgewiseError as exc:
            row.error = str(exc)
        report.rows.append(row)
    baseline_mean = means.get(spec.baseline)
    if baseline_mean is not None:
        for row in report.rows:
            if row.mean_inference_s is not None:
                row.speedup = baseline_mean / row.mean_inference_s
    return report


# --- evaluation --------------------------------------------------------------


@dataclass(frozen=True)
class EvalItem:
    """One scored prediction; the flag marks an environmentally-caused miss."""

    file: str
    truth: ClassLabel
    predicted: ClassLabel
    error_flag: Optional[str] = None

    def __post_init__(self):
        if self.truth is ClassLabel.NONE or self.predicted is ClassLabel.NONE:
            raise InvalidParamsError(f"{self.file}: NONE is not a category")
        if self.error_flag is not None:
            if self.error_flag not in ERROR_FLAGS:
                raise InvalidParamsError(
                    f"{self.file}: flag must be one of {ERROR_FLAGS}, "
                    f"got {self.error_flag!r}"
                )
            if self.predicted == self.truth:
                raise InvalidParamsError(
                    f"{self.file}: error flag on a correct prediction"
                )


@dataclass
class EvalReport:
    """Per-category scores, the confusion matrix, and both accuracies.

    The confusion matrix is indexed [truth][predicted] in category order.
    """

    labels: list[str]
    per_category: dict
    confusion: list[list[int]]
    total: int
    correct: int
    flagged: int
    accuracy_including_errors: float
    accuracy_excluding_errors: float

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "per_category": self.per_category,
            "confusion": self.confusion,
            "total": self.total,
            "correct": self.correct,
            "flagged": self.flagged,
            "accuracy_including_errors": self.accuracy_including_errors,
            "accuracy_excluding_errors": self.accuracy_excluding_errors,
        }


def evaluate(items: Sequence[EvalItem]) -> EvalReport:
    """Score predictions against their ground truth.

    accuracy_including_errors = correct / total. accuracy_excluding_errors
    additionally credits flagged misclassifications, giving the ceiling the
    model would reach if those perturbations were resolved.
    """
    if not items:
        raise InvalidParamsError("cannot evaluate an empty item sequence")
    index = {label: i for i, label in enumerate(REAL_LABELS)}
    confusion = [[0] * len(REAL_LABELS) for _ in REAL_LABELS]
    totals = {label: 0 for label in REAL_LABELS}
    corrects = {label: 0 for label in REAL_LABELS}
    flagged = 0
    for item in items:
        confusion[index[item.truth]][index[item.predicted]] += 1
        totals[item.truth] += 1
        if item.predicted == item.truth:
            corrects[item.truth] += 1
        elif item.error_flag is not None:
            flagged += 1
    total = len(items)
    correct = sum(corrects.values())
    return EvalReport(
        labels=[str(label) for label in REAL_LABELS],
        per_category={
            str(label): {"total": totals[label], "correct": corrects[label]}
            for label in REAL_LABELS
        },
        confusion=confusion,
        total=total,
        correct=correct,
        flagged=flagged,
        accuracy_including_errors=correct / total,
        accuracy_excluding_errors=(correct + flagged) / total,
    )


def load_eval_manifest(path) -> list[EvalItem]:
    """Read a JSON-lines manifest of {"file", "truth", "predicted", "flag"?}."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read manifest: {exc}") from exc
    items = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(row, dict):
            raise SchemaError(f"{path}:{lineno}: row must be an object")
        for key in ("file", "truth", "predicted"):
            if key not in row:
                raise SchemaError(f"{path}:{lineno}: missing {key!r}")
        try:
            items.append(
                EvalItem(
                    file=str(row["file"]),
                    truth=parse_label(row["truth"]),
                    predicted=parse_label(row["predicted"]),
                    error_flag=row.get("flag"),
                )
            )
        except EdgewiseError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return items


# --- report emission ---------------------------------------------------------

BENCH_CSV_HEADER = [
    "name",
    "precision",
    "resolution_scale",
    "queue_capacity",
    "power_mode",
    "watts",
    "mean_inference_s",
    "median_inference_s",
    "ips",
    "efficiency",
    "speedup",
    "realtime",
    "error",
]

EVAL_CSV_HEADER = ["category", "total", "correct"]


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def emit_report(report, fmt: str) -> bytes:
    """Serialise a bench or eval report with stable ordering.

    JSON output sorts keys; CSV has a fixed header. The same report always
    emits identical bytes.
    """
    if fmt not in ("json", "csv"):
        raise ReportError(f"unsupported format: {fmt!r}")
    if isinstance(report, BenchReport):
        if not report.rows:
            raise ReportError("unsupported: empty report")
        if fmt == "json":
            return (json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n").encode()
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(BENCH_CSV_HEADER)
        for row in report.rows:
            data = row.to_dict()
            writer.writerow([_csv_cell(data[key]) for key in BENCH_CSV_HEADER])
        return out.getvalue().encode()
    if isinstance(report, EvalReport):
        if report.total == 0:
            raise ReportError("unsupported: empty report")
        if fmt == "json":
            return (json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n").encode()
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(EVAL_CSV_HEADER)
        for label in report.labels:
            scores = report.per_category[label]
            writer.writerow([label, scores["total"], scores["correct"]])
        return out.getvalue().encode()
    raise ReportError(f"unsupported report type: {type(report).__name__}")
