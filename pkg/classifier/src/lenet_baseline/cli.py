"""Command-line interface for the baseline classifier.

Exit codes: 0 success, 1 usage error, 2 bad data or configuration,
3 filesystem error.
"""

import argparse
import logging
import sys
from pathlib import Path

from .data import load_split
from .errors import ConfigurationError, DataError
from .sweep import save_accuracy_figure, sweep, write_report
from .train import DEFAULT_SEEDS, TrainingRecipe, train_eval

USAGE_EXIT = 1
DATA_EXIT = 2
IO_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _parse_seeds(text: str) -> tuple:
    try:
        seeds = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigurationError(f"seeds must be comma-separated integers, got {text!r}")
    if not seeds:
        raise ConfigurationError("at least one seed is required")
    return seeds


def _add_training_flags(parser) -> None:
    parser.add_argument("--seeds", default=",".join(str(s) for s in DEFAULT_SEEDS),
                        help="comma-separated training seeds (default %(default)s)")
    parser.add_argument("--epochs", type=int, default=TrainingRecipe().epochs)
    parser.add_argument("--batch-size", type=int, default=TrainingRecipe().batch_size)
    parser.add_argument("--learning-rate", type=float, default=TrainingRecipe().learning_rate)
    parser.add_argument("--train-limit", type=int, default=None,
                        help="use only the first N training samples")
    parser.add_argument("--test-limit", type=int, default=None,
                        help="use only the first N test samples")
    parser.add_argument("--device", default="cpu")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lenet-baseline",
                     description="train a small convolutional digit classifier")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="train over every (estimator, lux) cell")
    p_sweep.add_argument("--data", required=True, help="reconstruction root directory")
    p_sweep.add_argument("--out", required=True, help="output directory for the report")
    p_sweep.add_argument("--delimiter", default=",")
    _add_training_flags(p_sweep)

    p_train = sub.add_parser("train-eval", help="train on one manifest pair")
    p_train.add_argument("--train", required=True, help="training split manifest")
    p_train.add_argument("--test", required=True, help="test split manifest")
    _add_training_flags(p_train)
    return parser


def _recipe(args) -> TrainingRecipe:
    return TrainingRecipe(epochs=args.epochs, batch_size=args.batch_size,
                          learning_rate=args.learning_rate)


def _cmd_sweep(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = sweep(
        args.data,
        recipe=_recipe(args),
        seeds=_parse_seeds(args.seeds),
        train_limit=args.train_limit,
        test_limit=args.test_limit,
        device=args.device,
    )
    results_path = out_dir / "results.csv"
    with open(results_path, "w", encoding="utf-8") as sink:
        write_report(report, sink, delimiter=args.delimiter)
    print(results_path)
    if report.lux_levels:
        figure_path = out_dir / "accuracy_vs_lux.png"
        save_accuracy_figure(report, figure_path)
        print(figure_path)
    return 0


def _cmd_train_eval(args) -> int:
    train = load_split(args.train, limit=args.train_limit)
    test = load_split(args.test, limit=args.test_limit)
    recipe = _recipe(args)
    accuracies = []
    for seed in _parse_seeds(args.seeds):
        accuracy = train_eval(train, test, recipe, seed=seed, device=args.device)
        accuracies.append(accuracy)
        print(f"seed {seed}: accuracy {accuracy:.4f}")
    print(f"mean accuracy {sum(accuracies) / len(accuracies):.4f}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_train_eval(args)
    except (ConfigurationError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return IO_EXIT


if __name__ == "__main__":
    sys.exit(main())
