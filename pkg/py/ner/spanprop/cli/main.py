from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from ..corpus import CorpusError, read_jsonl
from ..neural import CheckpointError, load_checkpoint
from . import commands
from .config import ConfigError, HyperParams, load_run_config, load_synth_config
from .train import NumericError, train

LOGGER = logging.getLogger("spanprop")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _require(path: Optional[Path], what: str) -> Path:
    if path is None:
        raise ConfigError(f"No {what} given; pass --{what} or set '{what}' in the config file")
    return path


def cmd_train(args: argparse.Namespace) -> int:
    run = load_run_config(args.config, args.set, seed=args.seed)
    train_path = _require(args.train or run.paths.get("train"), "train")
    dev_path = args.dev or run.paths.get("dev")

    train_corpus = read_jsonl(train_path, logger=LOGGER)
    dev_corpus = read_jsonl(dev_path, logger=LOGGER) if dev_path else None
    result = train(run.hyperparams, train_corpus, dev_corpus, args.out, logger=LOGGER)
    print(
        json.dumps(
            {
                "best_epoch": result.best_epoch,
                "best_metric": result.best_metric,
                "checkpoint": str(result.best_path),
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def _decode_hyperparams(args: argparse.Namespace, stored: dict) -> HyperParams:
    """Stored hyperparameters < --config file < --set < --seed."""

    base = HyperParams.from_dict(stored)
    return load_run_config(args.config, args.set, seed=args.seed, base=base, logger=LOGGER).hyperparams


def cmd_eval(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    hyperparams = _decode_hyperparams(args, checkpoint.hyperparams)
    corpus = read_jsonl(args.corpus, logger=LOGGER)
    evaluation = commands.evaluate(checkpoint, corpus, hyperparams, logger=LOGGER)
    commands.write_report(evaluation.report, args.out)
    print(evaluation.report.to_json() if args.json else evaluation.report.render_text())
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    hyperparams = _decode_hyperparams(args, checkpoint.hyperparams)
    corpus = read_jsonl(args.corpus, logger=LOGGER)
    commands.predict(
        checkpoint, corpus, Path(args.out) / "predictions.jsonl", hyperparams, logger=LOGGER
    )
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    config, file_seed = load_synth_config(args.config, args.set)
    seed = args.seed if args.seed is not None else file_seed
    commands.synth(config, seed, args.out, logger=LOGGER)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    summary = commands.stats(read_jsonl(args.corpus, logger=LOGGER))
    if args.json:
        print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    else:
        print(commands.render_stats(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spanprop", description="Nested NER by span proposal, boundary regression and Soft-NMS"
    )
    parser.add_argument("--log-level", default="INFO", help="logging level (default INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(command: argparse.ArgumentParser, *, out: bool = True) -> None:
        command.add_argument("--config", type=Path, default=None, help="key = value config file")
        command.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key"
        )
        command.add_argument("--seed", type=int, default=None)
        if out:
            command.add_argument("--out", type=Path, default=Path("runs"), help="output directory")

    train_cmd = sub.add_parser("train", help="train a model")
    common(train_cmd)
    train_cmd.add_argument("--train", type=Path, default=None, help="training corpus (JSONL)")
    train_cmd.add_argument("--dev", type=Path, default=None, help="dev corpus for model selection")
    train_cmd.set_defaults(func=cmd_train)

    eval_cmd = sub.add_parser("eval", help="evaluate a checkpoint on a gold corpus")
    common(eval_cmd)
    eval_cmd.add_argument("--checkpoint", type=Path, required=True)
    eval_cmd.add_argument("--corpus", type=Path, required=True)
    eval_cmd.add_argument("--json", action="store_true", help="print the report as JSON")
    eval_cmd.set_defaults(func=cmd_eval)

    predict_cmd = sub.add_parser("predict", help="write predicted entities with scores")
    common(predict_cmd)
    predict_cmd.add_argument("--checkpoint", type=Path, required=True)
    predict_cmd.add_argument("--corpus", type=Path, required=True)
    predict_cmd.set_defaults(func=cmd_predict)

    synth_cmd = sub.add_parser("synth", help="generate a synthetic nested corpus")
    common(synth_cmd)
    synth_cmd.set_defaults(func=cmd_synth)

    stats_cmd = sub.add_parser("stats", help="corpus statistics")
    stats_cmd.add_argument("--corpus", type=Path, required=True)
    stats_cmd.add_argument("--json", action="store_true")
    stats_cmd.set_defaults(func=cmd_stats)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG

    level = getattr(logging, str(args.log_level).upper(), None)
    if not isinstance(level, int):
        print(f"error: unknown log level '{args.log_level}'", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        return args.func(args)
    except ConfigError as exc:
        LOGGER.error("%s", exc)
        return EXIT_CONFIG
    except (CorpusError, CheckpointError, FileNotFoundError) as exc:
        LOGGER.error("%s", exc)
        return EXIT_DATA
    except NumericError as exc:
        LOGGER.error("%s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
