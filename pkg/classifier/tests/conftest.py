"""Shared fixtures: handcrafted manifest trees with class-correlated rasters.

Real reconstructed datasets are large and slow to produce, so tests run
on synthetic stand-ins that honor the same manifest schema. Each toy
image encodes its label as a bright two-row band (label k lights rows
2k+4 and 2k+5), making the classification task learnable in seconds.
"""

import json

import numpy as np
import pytest


def toy_raster(label: int, rng) -> np.ndarray:
    image = rng.uniform(0.0, 0.2, size=(28, 28)).astype(np.float32)
    row = 4 + 2 * int(label)
    image[row:row + 2, :] = rng.uniform(1.5, 2.5, size=(2, 28)).astype(np.float32)
    return image


def write_split(directory, kind, split, labels, estimator=None, lux_mlux=None, seed=0):
    """Write one split directory (manifest.json + per-sample .npy rasters)."""
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    samples = []
    for index, label in enumerate(labels):
        name = f"{index:05d}.npy"
        np.save(directory / name, toy_raster(label, rng))
        samples.append({"index": index, "label": int(label), "path": name})
    manifest = {
        "format_version": 1,
        "dataset": "toy",
        "kind": kind,
        "split": split,
        "samples": samples,
    }
    if estimator is not None:
        manifest["estimator"] = estimator
    if lux_mlux is not None:
        manifest["lux_mlux"] = lux_mlux
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    return path


def cycling_labels(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64) % 10


@pytest.fixture(scope="session")
def rec_tree(tmp_path_factory):
    """A reconstruction root: 2 estimators x 2 lux levels plus a reference
    pair, 40 train / 20 test samples per split."""
    root = tmp_path_factory.mktemp("rec_tree")
    seed = 0
    for estimator in ("counts", "pf"):
        for lux in (5, 160):
            for split, count in (("train", 40), ("test", 20)):
                write_split(
                    root / estimator / split / f"{lux}mlux",
                    "rec", split, cycling_labels(count),
                    estimator=estimator, lux_mlux=lux, seed=seed,
                )
                seed += 1
    for split, count in (("train", 40), ("test", 20)):
        write_split(root / "reference" / split, "reference", split,
                    cycling_labels(count), seed=seed)
        seed += 1
    return root


@pytest.fixture()
def split_pair(tmp_path):
    """One rec train/test manifest pair for single-cell tests."""
    rng_seed = 11
    train = write_split(tmp_path / "counts" / "train" / "5mlux", "rec", "train",
                        cycling_labels(40), estimator="counts", lux_mlux=5, seed=rng_seed)
    test = write_split(tmp_path / "counts" / "test" / "5mlux", "rec", "test",
                       cycling_labels(20), estimator="counts", lux_mlux=5, seed=rng_seed + 1)
    return train, test
