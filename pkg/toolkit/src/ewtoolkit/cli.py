"""Toolkit command line: split, find-lr, train, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .datasets import DatasetError, read_manifest, split_dataset


def _cmd_split(args) -> int:
    sources = {}
    for item in args.source:
        if "=" in item:
            name, _, path = item.partition("=")
        else:
            name, path = Path(item).name, item
        sources[name] = path
    manifests = split_dataset(sources, split=tuple(args.split), seed=args.seed)
    written = manifests.write(args.out_dir)
    for name, path in sorted(written.items()):
        print(f"{name}: {path}")
    return 0


def _cmd_find_lr(args) -> int:
    from .lrfinder import find_learning_rate
    from .training import TrainConfig

    config = _config_from_args(args)
    entries = read_manifest(args.train)
    result = find_learning_rate(
        config, entries, upper=args.upper, count=args.count,
        probe_epochs=args.probe_epochs,
    )
    print(json.dumps({"rate": result.rate, "losses": result.losses}, indent=2))
    return 0


def _cmd_train(args) -> int:
    from .training import consolidate, export_model, history_to_csv, train

    config = _config_from_args(args)
    train_entries = read_manifest(args.train)
    val_entries = read_manifest(args.val) if args.val else None
    model, history = train(config, train_entries, val_entries)
    model, history = consolidate(model, config, train_entries, val_entries, history)
    export_model(model, args.out, include_optimizer=args.keep_optimizer)
    if args.history:
        Path(args.history).write_text(history_to_csv(history))
    last = history[-1] if history else None
    if last is not None:
        print(f"epochs: {last.epoch}  train_acc: {last.train_accuracy:.4f}  "
              f"val_acc: {last.val_accuracy:.4f}")
    print(f"model: {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from .server import EchoPredictor, KerasPredictor, serve

    if args.stub:
        width, _, height = args.stub.partition("x")
        predictor = EchoPredictor((int(width), int(height)))
    elif args.model:
        predictor = KerasPredictor(args.model)
    else:
        print("serve needs --model or --stub WxH", file=sys.stderr)
        return 1
    serve(predictor, host=args.host, port=args.port)
    return 0


def _config_from_args(args):
    from .training import TrainConfig

    kwargs = {}
    for name in ("base_model", "learning_rate", "consolidation_lr", "epochs",
                 "consolidation_epochs", "batch_size", "resolution_scale"):
        value = getattr(args, name, None)
        if value is not None:
            kwargs[name] = value
    if getattr(args, "no_pretrained", False):
        kwargs["pretrained"] = False
    if getattr(args, "base_resolution", None):
        width, _, height = args.base_resolution.partition("x")
        kwargs["base_resolution"] = (int(width), int(height))
    return TrainConfig(**kwargs)


def _add_config_flags(parser) -> None:
    parser.add_argument("--base-model", dest="base_model")
    parser.add_argument("--no-pretrained", action="store_true")
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--consolidation-lr", dest="consolidation_lr", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--consolidation-epochs", dest="consolidation_epochs",
                        type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--resolution-scale", dest="resolution_scale", type=float)
    parser.add_argument("--base-resolution", dest="base_resolution",
                        help="WxH, e.g. 512x384")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ewtoolkit",
        description="Train, export, and serve the recycling classifier.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    split_p = sub.add_parser("split", help="stratified train/val/test split")
    split_p.add_argument("--source", action="append", required=True,
                         help="labelled directory; repeat for a second source; "
                              "NAME=PATH to name it")
    split_p.add_argument("--out-dir", required=True)
    split_p.add_argument("--split", nargs=3, type=float, default=[72, 18, 10],
                         metavar=("TRAIN", "VAL", "TEST"))
    split_p.add_argument("--seed", type=int, default=0)
    split_p.set_defaults(func=_cmd_split)

    lr_p = sub.add_parser("find-lr", help="scan learning rates below a bound")
    lr_p.add_argument("--train", required=True, help="train manifest (.jsonl)")
    lr_p.add_argument("--upper", type=float, default=1e-4)
    lr_p.add_argument("--count", type=int, default=5)
    lr_p.add_argument("--probe-epochs", type=int, default=2)
    _add_config_flags(lr_p)
    lr_p.set_defaults(func=_cmd_find_lr)

    train_p = sub.add_parser("train", help="run the full schedule and export")
    train_p.add_argument("--train", required=True)
    train_p.add_argument("--val")
    train_p.add_argument("--out", required=True, help="export path (.h5)")
    train_p.add_argument("--history", help="write per-epoch history CSV here")
    train_p.add_argument("--keep-optimizer", action="store_true")
    _add_config_flags(train_p)
    train_p.set_defaults(func=_cmd_train)

    serve_p = sub.add_parser("serve", help="serve a model over the wire protocol")
    serve_p.add_argument("--model", help="exported .h5 model")
    serve_p.add_argument("--stub", help="echo stub instead of a model, WxH")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=5577)
    serve_p.set_defaults(func=_cmd_serve)

    return parser


def main() -> None:
    parser = build_parser()
    args = parser.parse_args()
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        sys.exit(1)
    try:
        sys.exit(args.func(args))
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
