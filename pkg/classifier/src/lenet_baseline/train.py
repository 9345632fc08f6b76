"""Single-cell training and evaluation.

The recipe is fixed for a whole experiment: 10 epochs of Adam at
learning rate 0.001 with batch size 64 and cross-entropy loss. Results
are deterministic for a given seed up to framework-level
nondeterminism; on CPU, repeated runs reproduce bit-identical
accuracies in practice.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader, TensorDataset

from .data import SplitData
from .errors import ConfigurationError
from .model import LeNet5

DEFAULT_SEEDS = (0, 1, 2)


@dataclass(frozen=True)
class TrainingRecipe:
    """Hyperparameters of one training run."""

    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be positive, got {self.learning_rate}")


def _as_dataset(split: SplitData) -> TensorDataset:
    return TensorDataset(torch.from_numpy(split.images), torch.from_numpy(split.labels))


def train_eval(
    train: SplitData,
    test: SplitData,
    recipe: TrainingRecipe = TrainingRecipe(),
    seed: int = 0,
    device: str = "cpu",
) -> float:
    """Train a fresh LeNet-5 on ``train`` and return its accuracy on ``test``."""
    if train.count == 0 or test.count == 0:
        raise ConfigurationError("train and test splits must both be non-empty")

    torch.manual_seed(seed)
    model = LeNet5().to(device)
    optimizer = torch.optim.Adam(model.parameters(), lr=recipe.learning_rate)
    criterion = nn.CrossEntropyLoss()
    loader = DataLoader(
        _as_dataset(train),
        batch_size=recipe.batch_size,
        shuffle=True,
        generator=torch.Generator().manual_seed(seed),
    )

    model.train()
    for _epoch in range(recipe.epochs):
        for images, labels in loader:
            optimizer.zero_grad()
            loss = criterion(model(images.to(device)), labels.to(device))
            loss.backward()
            optimizer.step()

    return evaluate(model, test, batch_size=recipe.batch_size, device=device)


def evaluate(model: nn.Module, split: SplitData, batch_size: int = 64, device: str = "cpu") -> float:
    """Fraction of ``split`` samples the model labels correctly."""
    if split.count == 0:
        raise ConfigurationError("cannot evaluate on an empty split")
    loader = DataLoader(_as_dataset(split), batch_size=batch_size, shuffle=False)
    model.eval()
    correct = 0
    with torch.no_grad():
        for images, labels in loader:
            predictions = model(images.to(device)).argmax(dim=1)
            correct += (predictions.cpu() == labels).sum().item()
    return correct / split.count


def seed_mean_accuracy(accuracies) -> float:
    """Mean over per-seed accuracies, the statistic comparisons are made on."""
    values = np.asarray(list(accuracies), dtype=np.float64)
    if values.size == 0:
        raise ConfigurationError("no accuracies to average")
    return float(values.mean())
