"""Accuracy sweep over the (estimator, lux) grid.

Discovers dataset cells under a reconstruction root, trains one model
per cell per seed, and produces a delimited results table plus an
accuracy-vs-illuminance figure. Cells with a missing split are skipped
with a warning rather than failing the whole sweep.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from .data import load_split, read_manifest
from .errors import ConfigurationError
from .train import DEFAULT_SEEDS, TrainingRecipe, train_eval

logger = logging.getLogger(__name__)

REFERENCE_NAME = "reference"


@dataclass(frozen=True)
class AccuracyEntry:
    """Accuracy of one (estimator, lux, seed) training run.

    Reference runs carry ``estimator="reference"`` and no lux level.
    """

    estimator: str
    lux_mlux: Optional[float]
    seed: int
    accuracy: float
    train_count: int
    test_count: int

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ConfigurationError(f"accuracy must be in [0, 1], got {self.accuracy}")


@dataclass(frozen=True)
class AccuracyReport:
    """All entries of one sweep, with helpers for seed-mean comparisons."""

    entries: Tuple[AccuracyEntry, ...]

    @property
    def estimators(self) -> tuple:
        return tuple(sorted({e.estimator for e in self.entries if e.lux_mlux is not None}))

    @property
    def lux_levels(self) -> tuple:
        return tuple(sorted({e.lux_mlux for e in self.entries if e.lux_mlux is not None}))

    def mean_accuracy(self, estimator: str, lux_mlux: Optional[float] = None) -> float:
        values = [
            e.accuracy for e in self.entries
            if e.estimator == estimator and e.lux_mlux == lux_mlux
        ]
        if not values:
            raise ConfigurationError(f"no entries for ({estimator}, {lux_mlux})")
        return sum(values) / len(values)


def discover_cells(root) -> dict:
    """Map (estimator, lux_mlux) -> {split: manifest path} under a root.

    The grid coordinates come from manifest contents, not directory
    names. Reference splits appear under the ("reference", None) key.
    """
    root = Path(root)
    cells = {}
    for manifest_path in sorted(root.glob("*/*/*/manifest.json")):
        manifest = read_manifest(manifest_path)
        if manifest["kind"] != "rec":
            continue
        key = (manifest.get("estimator"), manifest.get("lux_mlux"))
        if key[0] is None or key[1] is None:
            logger.warning("%s: rec manifest without estimator/lux, skipped", manifest_path)
            continue
        cells.setdefault(key, {})[manifest["split"]] = manifest_path
    for manifest_path in sorted(root.glob(f"{REFERENCE_NAME}/*/manifest.json")):
        manifest = read_manifest(manifest_path)
        if manifest["kind"] != REFERENCE_NAME:
            continue
        cells.setdefault((REFERENCE_NAME, None), {})[manifest["split"]] = manifest_path
    return cells


def sweep(
    root,
    recipe: TrainingRecipe = TrainingRecipe(),
    seeds=DEFAULT_SEEDS,
    train_limit: Optional[int] = None,
    test_limit: Optional[int] = None,
    device: str = "cpu",
    progress=None,
) -> AccuracyReport:
    """Train and evaluate every complete cell under ``root``.

    Returns an empty report when the root holds no usable cells. Cells
    missing one of the two splits are skipped with a warning.
    """
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ConfigurationError("at least one seed is required")
    cells = discover_cells(root)

    entries = []
    complete = []
    for key in sorted(cells, key=lambda k: (k[0], k[1] if k[1] is not None else -1.0)):
        splits = cells[key]
        if "train" not in splits or "test" not in splits:
            logger.warning(
                "cell %s is missing its %s split, skipped",
                key, "train" if "train" not in splits else "test",
            )
            continue
        complete.append((key, splits))

    done = 0
    total = len(complete) * len(seeds)
    for (estimator, lux_mlux), splits in complete:
        train = load_split(splits["train"], limit=train_limit)
        test = load_split(splits["test"], limit=test_limit)
        for seed in seeds:
            accuracy = train_eval(train, test, recipe, seed=seed, device=device)
            entries.append(AccuracyEntry(
                estimator=estimator, lux_mlux=lux_mlux, seed=seed,
                accuracy=accuracy, train_count=train.count, test_count=test.count,
            ))
            done += 1
            if progress is not None:
                progress(done, total)
    return AccuracyReport(entries=tuple(entries))


def write_report(report: AccuracyReport, sink, delimiter: str = ",") -> None:
    """Write a report as delimited text, one row per training run."""
    header = ("estimator", "lux_mlux", "seed", "train_samples", "test_samples", "accuracy")
    sink.write(delimiter.join(header) + "\n")
    for entry in report.entries:
        lux = "" if entry.lux_mlux is None else f"{entry.lux_mlux:g}"
        row = (entry.estimator, lux, str(entry.seed),
               str(entry.train_count), str(entry.test_count), repr(entry.accuracy))
        sink.write(delimiter.join(row) + "\n")


def save_accuracy_figure(report: AccuracyReport, path) -> None:
    """Render seed-mean accuracy against illuminance, one line per estimator.

    The reference accuracy, when present, appears as a dashed horizontal
    line. Raises ConfigurationError if the report has no lux cells.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not report.lux_levels:
        raise ConfigurationError("report has no (estimator, lux) cells to plot")

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for estimator in report.estimators:
        levels = sorted({
            e.lux_mlux for e in report.entries
            if e.estimator == estimator and e.lux_mlux is not None
        })
        means = [report.mean_accuracy(estimator, lux) for lux in levels]
        ax.semilogx(levels, means, marker="o", label=estimator)
    if any(e.estimator == REFERENCE_NAME for e in report.entries):
        reference = report.mean_accuracy(REFERENCE_NAME, None)
        ax.axhline(reference, linestyle="--", color="gray", linewidth=1.0,
                   label=f"{REFERENCE_NAME} ({reference:.4f})")
    ax.set_xlabel("illuminance (mlux)")
    ax.set_ylabel("test accuracy")
    ax.set_title("classification accuracy vs illuminance")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
