from __future__ import annotations

import argparse
import json
import logging
import sys

from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from .core.config import RunConfig
from .core.corpus import TAP, Dataset, load_dataset, split_stats, unknown_token_report
from .core.evaluation import edit_distance_table, evaluate, render_table
from .core.lexer import TokenSeq, dedup_bag, tokenize
from .core.pipeline import Pipeline, prepare_examples
from .core.retrieval import RetrievalIndex, build_index, load_index, save_index
from .errors import AssertEditError, ConfigError

logger = logging.getLogger("assertedit")

LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Exit codes:
EXIT_OK: int = 0
EXIT_FAILURE: int = 1
EXIT_USAGE: int = 2


def configure_logging(level: str, verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else level.upper(), format=LOG_FORMAT,
                        stream=sys.stderr, force=True)


def load_config(args: argparse.Namespace) -> RunConfig:
    """
    Defaults, then the JSON config file, then explicit flags.
    """
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    dataset_format = {"text": "parallel-text"}.get(args.format, args.format)
    return config.override(
        dataset=getattr(args, "dataset", None),
        format=dataset_format,
        seed=args.seed,
        coefficient=args.coefficient,
        workers=args.workers,
        beam_size=args.beam_size,
        max_epochs=getattr(args, "epochs", None),
    )


def emit(payload: Any, out: Optional[str]) -> None:
    """
    Writes JSON to the --out file, or to stdout.
    """
    text: str = json.dumps(payload, indent=2, ensure_ascii=False)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def read_token_lines(path: str) -> List[TokenSeq]:
    """
    One token sequence per line, tokens separated by whitespace.
    """
    with open(path, "r", encoding="utf-8") as f:
        return [line.split() for line in f.read().splitlines()]


def open_dataset(config: RunConfig, split: str = "train") -> Dataset:
    if not config.dataset:
        raise ConfigError("no dataset given")
    return load_dataset(config.dataset, config.format, split)


def open_index(dataset: Dataset, config: RunConfig, index_path: Optional[str]) -> RetrievalIndex:
    """
    Loads a persisted index, or indexes the training split (the whole dataset if it has none).
    """
    if index_path:
        return load_index(index_path, dataset)
    return build_index(dataset.train or list(dataset), config.coefficient)


def queries(args: argparse.Namespace, dataset: Dataset) -> List[TokenSeq]:
    if args.query is not None:
        return [tokenize(args.query)]
    if args.batch is not None:
        return read_token_lines(args.batch)
    return [tap.focal_test for tap in dataset.split(args.split)]


def cmd_index(args: argparse.Namespace, config: RunConfig) -> int:
    dataset = open_dataset(config)
    index = open_index(dataset, config, None)
    if not args.out:
        raise ConfigError("index needs --out")
    save_index(index, args.out)
    emit({"index": args.out, "entries": len(index), "coefficient": config.coefficient}, None)
    return EXIT_OK


def cmd_retrieve(args: argparse.Namespace, config: RunConfig) -> int:
    dataset = open_dataset(config)
    index = open_index(dataset, config, args.index)
    results: List[Dict[str, Any]] = []
    for query in queries(args, dataset):
        result = index.retrieve_top1(dedup_bag(query))
        results.append({
            "id": result.tap_id,
            "score": result.score,
            "focal_test": " ".join(result.retrieved_focal_test),
            "assertion": " ".join(result.retrieved_assertion),
        })
    emit(results, args.out)
    return EXIT_OK


def cmd_build_edits(args: argparse.Namespace, config: RunConfig) -> int:
    dataset = open_dataset(config)
    index = open_index(dataset, config, args.index)
    examples = prepare_examples(dataset.split(args.split), index, config.max_edits, config.workers)
    lines: str = "".join(json.dumps(e.to_record(), ensure_ascii=False) + "\n" for e in examples)
    if args.out:
        Path(args.out).write_text(lines, encoding="utf-8")
    else:
        sys.stdout.write(lines)
    return EXIT_OK


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    from .model.checkpoint import save_checkpoint
    from .model.trainer import train

    if not args.out:
        raise ConfigError("train needs --out for the checkpoint")
    dataset = open_dataset(config)
    index = load_index(args.index, dataset.train) if args.index else build_index(dataset.train, config.coefficient)

    checkpoint = train(dataset, index, config, progress=logger.isEnabledFor(logging.INFO))
    save_checkpoint(checkpoint, args.out)
    emit({
        "checkpoint": args.out,
        "best_epoch": checkpoint.best_epoch,
        "epochs": len(checkpoint.history),
        "history": [stats._asdict() for stats in checkpoint.history],
    }, None)
    return EXIT_OK


def cmd_generate(args: argparse.Namespace, config: RunConfig) -> int:
    checkpoint = None
    if not args.retrieval_only:
        from .model.checkpoint import load_checkpoint

        if not args.checkpoint:
            raise ConfigError("generate needs --checkpoint (or --retrieval-only)")
        checkpoint = load_checkpoint(args.checkpoint)

        # Retrieve the way the model was trained:
        trained_with: str = checkpoint.config.coefficient
        if args.coefficient is None:
            config = config.override(coefficient=trained_with)
        elif args.coefficient != trained_with:
            logger.warning("Retrieving with %s, but the model was trained on %s prototypes", args.coefficient, trained_with)

    dataset = open_dataset(config)
    index = open_index(dataset, config, args.index)
    if checkpoint is not None and index.coefficient.name != config.coefficient:
        raise ConfigError(f"index '{args.index}' uses {index.coefficient.name}, expected {config.coefficient}")

    pipeline = Pipeline(index, checkpoint, beam_size=config.beam_size, max_edits=config.max_edits)
    predictions = pipeline.generate_batch(queries(args, dataset), config.workers,
                                          progress=logger.isEnabledFor(logging.INFO))
    failures: int = sum(1 for p in predictions if not p)

    summary: Dict[str, Any] = {"coefficient": index.coefficient.name, "failures": failures}
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.writelines(" ".join(p) + "\n" for p in predictions)
        summary.update(predictions=len(predictions), out=args.out)
    else:
        summary.update(predictions=[" ".join(p) for p in predictions])
    emit(summary, None)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> int:
    predictions = read_token_lines(args.predictions)
    references = read_token_lines(args.references)
    retrieved = read_token_lines(args.retrieved) if args.retrieved else None

    report = evaluate(predictions, references, retrieved)
    if args.table:
        text = render_table(report) + "\n"
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    else:
        emit(report.as_dict(), args.out)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace, config: RunConfig) -> int:
    dataset = open_dataset(config, args.split)
    taps: List[TAP] = dataset.split(args.split)
    index = open_index(dataset, config, args.index) if dataset.train else build_index(taps, config.coefficient)

    # A TAP that is the only indexed entry has nothing to retrieve once it is excluded:
    analyzed: List[TAP] = [tap for tap in taps if len(index) > 1 or tap.id not in index.taps]
    skipped: int = len(taps) - len(analyzed)
    if skipped:
        logger.warning("Skipped %d TAP(s): the index holds no other entry to retrieve", skipped)

    retrievals = [index.retrieve_top1(dedup_bag(tap.focal_test), exclude_id=tap.id) for tap in analyzed]
    histogram = edit_distance_table(analyzed, retrievals)
    report: Dict[str, Any] = {
        "split": args.split,
        "total": sum(histogram.values()),
        "skipped": skipped,
        "edit_distance": histogram,
        "splits": {name: stats.as_dict() for name, stats in split_stats(dataset).items()},
        "rejected": dataset.rejected,
    }

    if args.checkpoint:
        from .model.checkpoint import load_checkpoint

        report["unknown_tokens"] = unknown_token_report(taps, load_checkpoint(args.checkpoint).vocab)
    emit(report, args.out)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    "index": cmd_index,
    "retrieve": cmd_retrieve,
    "build-edits": cmd_build_edits,
    "train": cmd_train,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    common.add_argument("--seed", type=int)
    common.add_argument("--coefficient", choices=RunConfig.COEFFICIENTS)
    common.add_argument("--format", choices=("jsonl", "text", "parallel-text"), help="dataset format")
    common.add_argument("--index", help="persisted retrieval index")
    common.add_argument("--checkpoint", help="trained model checkpoint")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--workers", type=int)
    common.add_argument("--beam-size", type=int)
    common.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    common.add_argument("-v", "--verbose", action="store_true", help="same as --log-level DEBUG")

    parser = argparse.ArgumentParser(prog="assertedit", description="Retrieve-and-edit assertion generation")
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    for name in ("index", "retrieve", "build-edits", "train", "generate", "analyze"):
        sub = commands.add_parser(name, parents=[common])
        sub.add_argument("dataset", nargs="?", help="dataset file or directory (or 'dataset' in --config)")
        if name in ("retrieve", "generate"):
            sub.add_argument("--query", help="focal-test source text")
            sub.add_argument("--batch", help="file with one tokenized focal-test per line")
        if name in ("build-edits", "generate", "analyze"):
            sub.add_argument("--split", default="train" if name == "build-edits" else "test", choices=Dataset.SPLITS)
        if name == "train":
            sub.add_argument("--epochs", type=int, help="maximum number of epochs")
        if name == "generate":
            sub.add_argument("--retrieval-only", action="store_true", help="return retrieved assertions unchanged")

    evaluate_parser = commands.add_parser("evaluate", parents=[common])
    evaluate_parser.add_argument("predictions")
    evaluate_parser.add_argument("references")
    evaluate_parser.add_argument("--retrieved", help="retrieved assertions, adds the adaptation table")
    evaluate_parser.add_argument("--table", action="store_true", help="plain-text tables instead of JSON")
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Runs one subcommand and returns its exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    configure_logging(args.log_level, args.verbose)
    try:
        config = load_config(args)
        return COMMANDS[args.command](args, config)
    except ConfigError as e:
        logger.error("%s", e)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        logger.error("%s", e.strerror and f"{e.strerror}: '{e.filename}'" or e)
        return EXIT_FAILURE
    except (AssertEditError, OSError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_FAILURE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
