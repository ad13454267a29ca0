"""Edge inference orchestration and benchmarking for recycling classification.

The pipeline chains a frame source, a pluggable classifier backend, and a
majority-vote debounce queue that gates actuation events. Around it sit a
latency decomposition model, throughput/power/efficiency telemetry, a
configuration-sweep bench harness, and a real-world accuracy evaluator.
"""

from .backends import (
    Backend,
    BackendDescriptor,
    ExternalBackend,
    LatencyTrace,
    MockBackend,
    TraceBackend,
    encode_request,
    load_trace,
    load_traces,
    PROTOCOL_MAGIC,
)
from .bencheval import (
    BenchReport,
    BenchRow,
    EvalItem,
    EvalReport,
    SweepCombo,
    SweepSpec,
    emit_report,
    evaluate,
    load_eval_manifest,
    load_sweep_spec,
    run_sweep,
)
from .clock import MonotonicClock, SimulatedClock, make_clock
from .debounce import ActuationEvent, DebounceQueue
from .domain import (
    AccelConfig,
    BASE_HEIGHT,
    BASE_WIDTH,
    ClassLabel,
    Classification,
    DEFAULT_SEED,
    Frame,
    LABEL_COLORS,
    REAL_LABELS,
    parse_label,
    scaled_size,
)
from .errors import (
    BackendError,
    BackendUnavailableError,
    DimensionMismatchError,
    EdgewiseError,
    InvalidParamsError,
    ProtocolError,
    ReportError,
    SchemaError,
    UnknownLabelError,
)
from .latency import (
    LatencyBreakdown,
    LatencyParams,
    decompose_latency,
    predict_total_latency,
)
from .pipeline import (
    DirectorySource,
    JsonlSink,
    NullSink,
    RunSummary,
    StopCondition,
    StreamSink,
    SyntheticSource,
    WireSink,
    ingest_directory,
    resize_frame,
    resize_to,
    run_from_config,
    run_pipeline,
)
from .telemetry import (
    PowerProfile,
    PowerTable,
    REALTIME_IPS,
    TelemetryCollector,
    TelemetrySample,
    battery_life,
    efficiency,
    measure_ips,
)

__version__ = "0.1.0"
