"""Command-line entry point: run, bench, eval, latency, and power.

Output is JSON (or CSV for reports) for machines; --pretty prints small
human tables instead. Exit codes are part of the contract: 0 success,
1 validation/usage error, 2 runtime error. Reports are written atomically.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from .bencheval import (
    emit_report,
    evaluate,
    load_eval_manifest,
    load_sweep_spec,
    run_sweep,
)
from .errors import (
    EdgewiseError,
    InvalidParamsError,
    ReportError,
    SchemaError,
    UnknownLabelError,
)
from .latency import LatencyParams, decompose_latency, predict_total_latency
from .pipeline import StopCondition, run_from_config
from .telemetry import battery_life, efficiency

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

ENV_CONFIG = "EW_CONFIG"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract says validation errors are 1
    def error(self, message):
        raise UsageError(message)


def write_atomic(path, data: bytes) -> None:
    """Write via a temp file and rename, so readers never see partials."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _emit(data: bytes, out: str | None) -> None:
    if out:
        write_atomic(out, data)
    else:
        sys.stdout.write(data.decode())


def _cmd_latency(args) -> int:
    params = LatencyParams(
        n=args.n,
        n_star=args.n_star if args.n_star is not None else args.n,
        ips=args.ips,
        t_cts=args.t_cts,
        per_inference_s=args.per_inference,
        servo_base_s=args.servo_base if args.servo_base is not None else 0.0,
    )
    breakdown = decompose_latency(params)
    result = breakdown.to_dict()
    if args.servo_base is not None:
        result["predicted_total_s"] = predict_total_latency(
            params.n_star, params.period_s, args.servo_base
        )
    if args.pretty:
        lines = [f"{key:>18}: {value}" for key, value in result.items()]
        _emit(("\n".join(lines) + "\n").encode(), args.out)
    else:
        _emit((json.dumps(result, sort_keys=True, indent=2) + "\n").encode(), args.out)
    return EXIT_OK


def _cmd_power(args) -> int:
    result = {}
    if args.ips is not None and args.watts is not None:
        result["efficiency_per_w"] = efficiency(args.ips, args.watts)
    if args.capacity_wh is not None and args.avg_power_w is not None:
        result["battery_life_h"] = battery_life(args.capacity_wh, args.avg_power_w)
    if not result:
        raise UsageError(
            "nothing to compute: pass --ips with --watts, and/or "
            "--capacity-wh with --avg-power-w"
        )
    if args.pretty:
        lines = [f"{key:>18}: {value}" for key, value in result.items()]
        _emit(("\n".join(lines) + "\n").encode(), args.out)
    else:
        _emit((json.dumps(result, sort_keys=True, indent=2) + "\n").encode(), args.out)
    return EXIT_OK


def _load_config(args) -> tuple[dict, Path]:
    config_path = args.config or os.environ.get(ENV_CONFIG)
    if not config_path:
        raise UsageError(f"no config given (flag --config or ${ENV_CONFIG})")
    path = Path(config_path)
    try:
        config = json.loads(path.read_text())
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    return config, path.parent


def _cmd_run(args) -> int:
    config, base_dir = _load_config(args)
    stop = None
    if args.frames is not None or args.seconds is not None:
        stop = StopCondition(max_frames=args.frames, max_seconds=args.seconds)
    summary = run_pipeline_from_args(config, base_dir, args, stop)
    _emit(summary.to_json_bytes(), args.out)
    if summary.incomplete:
        print(f"run incomplete: {summary.error}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def run_pipeline_from_args(config, base_dir, args, stop):
    simulated = None
    if args.simulated_clock:
        simulated = True
    elif args.real_clock:
        simulated = False
    return run_from_config(
        config, base_dir, simulated=simulated, seed=args.seed, stop=stop
    )


def _format_for(args, default: str) -> str:
    if args.format:
        return args.format
    if args.out:
        suffix = Path(args.out).suffix.lower().lstrip(".")
        if suffix in ("json", "csv"):
            return suffix
    return default


def _cmd_bench(args) -> int:
    spec = load_sweep_spec(args.spec)
    if args.simulated_clock:
        spec.simulated_clock = True
    elif args.real_clock:
        spec.simulated_clock = False
    report = run_sweep(spec)
    data = emit_report(report, _format_for(args, "csv"))
    _emit(data, args.out)
    if args.plot:
        from .plots import render_bench_figure

        target = _plot_path(args, "ips")
        render_bench_figure(report, target)
        print(f"figure written to {target}", file=sys.stderr)
    return EXIT_OK


def _cmd_eval(args) -> int:
    items = load_eval_manifest(args.manifest)
    report = evaluate(items)
    data = emit_report(report, _format_for(args, "json"))
    _emit(data, args.out)
    if args.plot:
        from .plots import render_eval_figure

        target = _plot_path(args, "categories")
        render_eval_figure(report, target)
        print(f"figure written to {target}", file=sys.stderr)
    return EXIT_OK


def _plot_path(args, suffix: str) -> Path:
    if args.out:
        out = Path(args.out)
        return out.with_name(f"{out.stem}_{suffix}.png")
    return Path(f"report_{suffix}.png")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="edgewise",
        description="Edge inference pipeline runner, benchmark sweeps, and "
        "real-world accuracy evaluation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command")

    run_p = sub.add_parser("run", help="drive a pipeline from a JSON run config")
    run_p.add_argument("--config", help=f"run config path (default ${ENV_CONFIG})")
    run_p.add_argument("--out", help="write the run summary JSON here")
    run_p.add_argument("--frames", type=int, help="stop after this many frames")
    run_p.add_argument("--seconds", type=float, help="stop after this much time")
    run_p.add_argument("--seed", type=int, help="override the mock backend seed")
    clock = run_p.add_mutually_exclusive_group()
    clock.add_argument("--simulated-clock", action="store_true")
    clock.add_argument("--real-clock", action="store_true")
    run_p.set_defaults(func=_cmd_run)

    bench_p = sub.add_parser("bench", help="run a configuration sweep")
    bench_p.add_argument("--spec", required=True, help="sweep spec JSON path")
    bench_p.add_argument("--out", help="report path (.json or .csv)")
    bench_p.add_argument("--format", choices=("json", "csv"))
    bench_p.add_argument("--plot", action="store_true",
                         help="render a throughput figure next to the report")
    bclock = bench_p.add_mutually_exclusive_group()
    bclock.add_argument("--simulated-clock", action="store_true")
    bclock.add_argument("--real-clock", action="store_true")
    bench_p.set_defaults(func=_cmd_bench)

    eval_p = sub.add_parser("eval", help="score a labelled prediction manifest")
    eval_p.add_argument("--manifest", required=True, help="JSON-lines manifest path")
    eval_p.add_argument("--out", help="report path (.json or .csv)")
    eval_p.add_argument("--format", choices=("json", "csv"))
    eval_p.add_argument("--plot", action="store_true",
                        help="render a per-category figure next to the report")
    eval_p.set_defaults(func=_cmd_eval)

    lat_p = sub.add_parser("latency", help="decompose measured actuation latency")
    lat_p.add_argument("--n", type=int, required=True, help="measured queue length")
    lat_p.add_argument("--n-star", type=int, help="queue length to predict for")
    lat_p.add_argument("--ips", type=float, required=True)
    lat_p.add_argument("--t-cts", type=float, required=True,
                       help="measured classification-to-servo delay, seconds")
    lat_p.add_argument("--per-inference", type=float,
                       help="seconds per inference (overrides 1/ips)")
    lat_p.add_argument("--servo-base", type=float,
                       help="servo base latency; adds an Eq-style prediction")
    lat_p.add_argument("--out")
    lat_p.add_argument("--pretty", action="store_true")
    lat_p.set_defaults(func=_cmd_latency)

    pow_p = sub.add_parser("power", help="efficiency and battery-life figures")
    pow_p.add_argument("--ips", type=float)
    pow_p.add_argument("--watts", type=float)
    pow_p.add_argument("--capacity-wh", type=float)
    pow_p.add_argument("--avg-power-w", type=float)
    pow_p.add_argument("--out")
    pow_p.add_argument("--pretty", action="store_true")
    pow_p.set_defaults(func=_cmd_power)

    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    if not argv:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, InvalidParamsError, UnknownLabelError, ReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EdgewiseError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
