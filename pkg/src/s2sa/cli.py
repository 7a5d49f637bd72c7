"""``s2sa`` command line.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
The global seed can be overridden with the ``S2SA_SEED`` environment variable.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import load_config
from .errors import ConfigError, S2SAError


def _overrides(args) -> dict:
    values = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        values[key.strip()] = value.strip()
    for key in ("seed", "strategy", "workers", "mmi_lambda"):
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="s2sa", description="Seq2seq dialogue generation with selectable first context vector.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prepare", parents=[common], help="dedup, filter, split and build the vocabulary")
    s.add_argument("pairs")
    s.add_argument("out_dir")

    s = sub.add_parser("train", parents=[common], help="train a forward or reverse model")
    s.add_argument("data_dir")
    s.add_argument("checkpoint")
    s.add_argument("--direction", choices=["forward", "reverse"], default="forward")

    s = sub.add_parser("decode", parents=[common], help="decode one response per message line")
    s.add_argument("checkpoint")
    s.add_argument("messages")
    s.add_argument("output")
    s.add_argument("--strategy")
    s.add_argument("--reverse", dest="reverse_checkpoint")
    s.add_argument("--lambda", dest="mmi_lambda", type=float)
    s.add_argument("--workers", type=int)

    s = sub.add_parser("compare", parents=[common], help="run every method and write the metric and selection reports")
    s.add_argument("checkpoint")
    s.add_argument("test_pairs")
    s.add_argument("out_dir")
    s.add_argument("--reverse", dest="reverse_checkpoint")
    s.add_argument("--lambda", dest="mmi_lambda", type=float)
    s.add_argument("--workers", type=int)

    s = sub.add_parser("chat", parents=[common], help="interactive single-turn chat")
    s.add_argument("checkpoint")
    s.add_argument("--strategy")

    s = sub.add_parser("inspect", parents=[common], help="print checkpoint dimensions")
    s.add_argument("checkpoint")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "prepare":
            summary = pipeline.cmd_prepare(args.pairs, args.out_dir, cfg)
            sys.stdout.write(summary.text())
        elif args.command == "train":
            result = pipeline.cmd_train(args.data_dir, args.checkpoint, cfg, args.direction, progress=sys.stdout)
            print(f"best epoch: {result.best_epoch}")
        elif args.command == "decode":
            pipeline.cmd_decode(args.checkpoint, args.messages, args.output, cfg, args.reverse_checkpoint)
        elif args.command == "compare":
            res = pipeline.cmd_compare(args.checkpoint, args.test_pairs, args.out_dir, cfg, args.reverse_checkpoint)
            sys.stdout.write(res.metrics_tsv)
        elif args.command == "chat":
            return pipeline.cmd_chat(args.checkpoint, cfg, verbose=args.verbose)
        elif args.command == "inspect":
            sys.stdout.write(pipeline.cmd_inspect(args.checkpoint))
    except S2SAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
