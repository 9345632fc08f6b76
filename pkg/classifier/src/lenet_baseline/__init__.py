"""Baseline convolutional digit classifier for reconstructed rasters.

Trains a small LeNet-style network on dataset manifests produced by the
simulator's reconstruction step and reports test accuracy across the
(estimator, illuminance) grid.
"""

from .data import SplitData, load_split, read_manifest
from .errors import ConfigurationError, DataError
from .model import LeNet5
from .sweep import (
    AccuracyEntry,
    AccuracyReport,
    discover_cells,
    save_accuracy_figure,
    sweep,
    write_report,
)
from .train import DEFAULT_SEEDS, TrainingRecipe, evaluate, seed_mean_accuracy, train_eval

__all__ = [
    "AccuracyEntry",
    "AccuracyReport",
    "ConfigurationError",
    "DEFAULT_SEEDS",
    "DataError",
    "LeNet5",
    "SplitData",
    "TrainingRecipe",
    "discover_cells",
    "evaluate",
    "load_split",
    "read_manifest",
    "save_accuracy_figure",
    "seed_mean_accuracy",
    "sweep",
    "train_eval",
    "write_report",
]

__version__ = "0.1.0"
